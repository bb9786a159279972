#include <stdlib.h>

#include <algorithm>
#include <filesystem>
#include <optional>
#include <set>

#include "memhub/client.hpp"
#include "memhub/server.hpp"
#include "memhub/sim.hpp"
#include "memhub/tokens.hpp"

namespace memhub {

const std::vector<std::string_view>& builtin_scenario_sources();

namespace fs = std::filesystem;

namespace {

constexpr TimestampMs kSimEpochMs = 1696204800000;  // 2023-10-02T00:00:00Z
constexpr TimestampMs kRoundMs = 1000;

const std::set<std::string> kAskKinds = {"query", "recall", "curate", "window"};
const std::set<std::string> kExpectKeys = {
    "nonempty",     "empty",       "contains_token", "excludes_token",
    "all_contain",  "first_contains", "agents_cover", "only_agents",
    "min_count",    "error"};

std::string step_kind(const json& step) {
  static const char* kKinds[] = {"begin", "say",   "close",     "ask",
                                 "await", "label", "advance_ms"};
  if (!step.is_object()) throw_invalid("script steps must be objects");
  for (const char* k : kKinds) {
    if (step.contains(k)) return k;
  }
  throw_invalid("unknown script step " + step.dump());
}

struct ParsedAwait {
  std::string agent;
  std::string label;
};

ParsedAwait parse_await(const std::string& ref) {
  const auto colon = ref.find(':');
  if (colon == std::string::npos) {
    throw_invalid("await must be 'agent:label', got '" + ref + "'");
  }
  return {ref.substr(0, colon), ref.substr(colon + 1)};
}

void check_step(const json& step, const std::string& kind) {
  if (kind == "begin") {
    require_keys(step, {"begin"}, "begin step");
    require_keys(step["begin"], {"tags"}, "begin");
    validate_tags(get_optional<TagSet>(step["begin"], "tags").value_or(TagSet{}));
  } else if (kind == "say") {
    require_keys(step, {"say", "tags", "author_kind"}, "say step");
    if (get_field<std::string>(step, "say").empty()) {
      throw_invalid("say text is empty");
    }
    validate_tags(get_optional<TagSet>(step, "tags").value_or(TagSet{}));
    if (auto kind_name = get_optional<std::string>(step, "author_kind")) {
      author_kind_from_name(*kind_name);
    }
  } else if (kind == "close") {
    require_keys(step, {"close"}, "close step");
  } else if (kind == "ask") {
    require_keys(step, {"ask", "id", "expect"}, "ask step");
    const json ask = get_field<json>(step, "ask");
    if (!ask.is_object() || ask.size() != 1 ||
        !kAskKinds.count(ask.begin().key())) {
      throw_invalid("ask must hold exactly one of query, recall, curate, window");
    }
    if (get_field<std::string>(step, "id").empty()) throw_invalid("ask id empty");
    const json expect = get_field<json>(step, "expect");
    if (!expect.is_object()) throw_invalid("expect must be an object");
    for (const auto& [key, value] : expect.items()) {
      if (!kExpectKeys.count(key)) throw_invalid("unknown expectation " + key);
    }
  } else if (kind == "await" || kind == "label") {
    require_keys(step, {kind == "await" ? "await" : "label"}, "step");
    get_field<std::string>(step, kind == "await" ? "await" : "label");
  } else {
    require_keys(step, {"advance_ms"}, "advance step");
    if (get_field<std::int64_t>(step, "advance_ms") < 0) {
      throw_invalid("advance_ms must be non-negative");
    }
  }
}

// A retrieved unit an expectation is evaluated over.
struct Item {
  std::string agent;
  std::string content;
};

struct AskResult {
  std::vector<Item> items;
  std::vector<Item> first_group;  // first recalled episode, else first item
  std::size_t count = 0;          // hits for recall, items otherwise
  std::optional<ErrorCode> error;
};

AskResult extract(const std::string& kind, const json& response) {
  AskResult out;
  auto item_of = [](const json& record) {
    return Item{record.at("agent").get<std::string>(),
                record.at("content").get<std::string>()};
  };
  if (kind == "query") {
    for (const auto& r : response.at("results")) {
      out.items.push_back(item_of(r.at("record")));
    }
  } else if (kind == "curate") {
    for (const auto& r : response.at("items")) {
      out.items.push_back(item_of(r.at("record")));
    }
  } else if (kind == "recall") {
    bool first = true;
    for (const auto& hit : response.at("episodes")) {
      for (const auto& r : hit.at("records")) {
        out.items.push_back(item_of(r));
        if (first) out.first_group.push_back(out.items.back());
      }
      first = false;
    }
    out.count = response.at("episodes").size();
    return out;
  } else {
    for (const auto& it : response.at("items")) {
      out.items.push_back(Item{"", it.at("text").get<std::string>()});
    }
  }
  out.count = out.items.size();
  if (!out.items.empty()) out.first_group.push_back(out.items.front());
  return out;
}

bool contains(const Item& item, const std::string& token) {
  return item.content.find(token) != std::string::npos;
}

// Empty string when every expectation holds, else the first failure.
std::string evaluate(const json& expect, const AskResult& r) {
  if (auto code = get_optional<std::string>(expect, "error")) {
    if (!r.error) return "expected error " + *code + ", got success";
    if (error_code_name(*r.error) != *code) {
      return "expected error " + *code + ", got " +
             std::string(error_code_name(*r.error));
    }
    return "";
  }
  if (r.error) return "request failed: " + std::string(error_code_name(*r.error));
  const auto any_contains = [](const std::vector<Item>& items,
                               const std::string& t) {
    return std::any_of(items.begin(), items.end(),
                       [&](const Item& i) { return contains(i, t); });
  };
  if (get_optional<bool>(expect, "nonempty").value_or(false) && r.count == 0) {
    return "expected results, got none";
  }
  if (get_optional<bool>(expect, "empty").value_or(false) && r.count != 0) {
    return "expected no results, got " + std::to_string(r.count);
  }
  if (auto n = get_optional<std::size_t>(expect, "min_count")) {
    if (r.count < *n) {
      return "expected at least " + std::to_string(*n) + " results, got " +
             std::to_string(r.count);
    }
  }
  if (auto t = get_optional<std::string>(expect, "contains_token")) {
    if (!any_contains(r.items, *t)) return "no result contains " + *t;
  }
  if (auto t = get_optional<std::string>(expect, "excludes_token")) {
    if (any_contains(r.items, *t)) return "a result contains " + *t;
  }
  if (auto t = get_optional<std::string>(expect, "all_contain")) {
    if (r.items.empty()) return "no results to contain " + *t;
    for (const auto& i : r.items) {
      if (!contains(i, *t)) return "a result lacks " + *t;
    }
  }
  if (auto t = get_optional<std::string>(expect, "first_contains")) {
    if (!any_contains(r.first_group, *t)) return "first result lacks " + *t;
  }
  if (auto agents = get_optional<std::set<std::string>>(expect, "agents_cover")) {
    for (const auto& a : *agents) {
      const bool seen = std::any_of(r.items.begin(), r.items.end(),
                                    [&](const Item& i) { return i.agent == a; });
      if (!seen) return "no result from " + a;
    }
  }
  if (auto agents = get_optional<std::set<std::string>>(expect, "only_agents")) {
    for (const auto& i : r.items) {
      if (!agents->count(i.agent)) return "unexpected result from " + i.agent;
    }
  }
  return "";
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "memhub-sim-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) {
      throw Error(ErrorCode::kInternal, "cannot create a temporary directory");
    }
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

struct AgentRun {
  const SimAgent* spec;
  const std::vector<json>* script;
  std::unique_ptr<HubClient> client;
  std::size_t next = 0;
  std::optional<SessionId> session;
  std::set<std::string> labels;

  bool done() const { return next >= script->size(); }
};

const std::set<std::string> kReadOperations = {
    "query", "recall", "curate", "window", "episode.list", "episode.get",
    "record.get"};

class Runner {
 public:
  Runner(const Scenario& s, SimMode mode)
      : scenario_(s), mode_(mode), clock_(kSimEpochMs) {}

  ScenarioReport run();

 private:
  void setup(HubServer& server);
  bool step(AgentRun& a);
  void ask(AgentRun& a, const json& step);
  json isolate(AgentRun& a, const std::string& kind, json body) const;
  void note(const AgentRun* a, const std::string& method,
            const std::string& path, int status, const json& response);
  json call(AgentRun& a, const std::string& method, const std::string& path,
            const json& body);
  AgentRun* find(const std::string& id);

  const Scenario& scenario_;
  SimMode mode_;
  ManualClock clock_;
  std::unique_ptr<HubClient> admin_;
  std::vector<AgentRun> agents_;
  std::size_t round_ = 0;
  std::size_t reads_ = 0;
  ScenarioReport report_;
};

AgentRun* Runner::find(const std::string& id) {
  for (auto& a : agents_) {
    if (a.spec->id.str() == id) return &a;
  }
  return nullptr;
}

void Runner::note(const AgentRun* a, const std::string& method,
                  const std::string& path, int status, const json& response) {
  report_.transcript.push_back(
      "r" + std::to_string(round_) + " " +
      (a ? a->spec->id.str() : std::string("admin")) + " " + method + " " +
      path + " " + std::to_string(status) + " " + digest_of(response));
}

json Runner::call(AgentRun& a, const std::string& method,
                  const std::string& path, const json& body) {
  try {
    json out = a.client->call(method, path, body);
    note(&a, method, path, 200, out);
    return out;
  } catch (const Error& e) {
    note(&a, method, path, http_status(e.code()),
         json(error_code_name(e.code())));
    throw;
  }
}

void Runner::setup(HubServer& server) {
  for (const auto& policy : scenario_.policies) {
    admin_->call("POST", "/v1/policies", policy);
    note(nullptr, "POST", "/v1/policies", 200, policy);
  }
  for (const auto& pl : scenario_.pipelines) {
    const json body{{"pipeline", to_json(pl)}};
    admin_->call("POST", "/v1/policies", body);
    note(nullptr, "POST", "/v1/policies", 200, body);
  }
  for (const auto& spec : scenario_.agents) {
    const json grant{{"agent", spec.id.str()},
                     {"roles", spec.roles},
                     {"task_tags", spec.task_tags},
                     {"admin", false}};
    const json issued = admin_->call("POST", "/v1/tokens", grant);
    // The token itself is random, so only the grant enters the transcript.
    note(nullptr, "POST", "/v1/tokens", 200, grant);
    AgentRun run{&spec, &scenario_.scripts.at(spec.id.str()),
                 std::make_unique<HubClient>("127.0.0.1", server.port(),
                                             issued.at("token")),
                 0, std::nullopt, {}};
    agents_.push_back(std::move(run));
  }
}

json Runner::isolate(AgentRun& a, const std::string& kind, json body) const {
  if (mode_ != SimMode::kIsolated) return body;
  StructuredPredicate own;
  own.sessions = std::set<SessionId>{};
  if (a.session) own.sessions->insert(*a.session);
  const char* key = kind == "query" ? "predicate" : "filter";
  if (kind == "window") {
    body["target"] = a.session ? json{{"session", *a.session}}
                               : json{{"session", 0}};
    return body;
  }
  const StructuredPredicate given =
      body.contains(key) ? predicate_from_json(body[key]) : StructuredPredicate{};
  body[key] = to_json(conjoin(given, own));
  return body;
}

void Runner::ask(AgentRun& a, const json& step) {
  const json& ask = step["ask"];
  const std::string kind = ask.begin().key();
  json body = ask.begin().value();
  if (kind == "window" && body.contains("target") &&
      body["target"] == "current") {
    body["target"] = json{{"session", a.session.value_or(0)}};
  }
  body = isolate(a, kind, std::move(body));

  AssertionOutcome outcome;
  outcome.id = step["id"].get<std::string>();
  outcome.agent = a.spec->id.str();
  outcome.criterion =
      std::find(scenario_.criteria.begin(), scenario_.criteria.end(),
                outcome.id) != scenario_.criteria.end();

  AskResult result;
  ++reads_;
  try {
    result = extract(kind, call(a, "POST", "/v1/" + kind, body));
  } catch (const Error& e) {
    result.error = e.code();
  }
  outcome.result_count = result.count;
  outcome.detail = evaluate(step["expect"], result);
  outcome.passed = outcome.detail.empty();
  if (outcome.passed) outcome.detail = "ok";
  report_.assertions.push_back(std::move(outcome));
}

// Executes the agent's next step; false when it is blocked on an await.
bool Runner::step(AgentRun& a) {
  const json& step = (*a.script)[a.next];
  const std::string kind = step_kind(step);
  if (kind == "await") {
    const auto ref = parse_await(step["await"].get<std::string>());
    if (!find(ref.agent)->labels.count(ref.label)) return false;
  } else if (kind == "label") {
    a.labels.insert(step["label"].get<std::string>());
  } else if (kind == "advance_ms") {
    clock_.advance(step["advance_ms"].get<TimestampMs>());
  } else if (kind == "begin") {
    const json body{{"task_tags", step["begin"].value("tags", json::array())}};
    a.session = call(a, "POST", "/v1/sessions", body)["session"].get<SessionId>();
  } else if (kind == "say") {
    if (!a.session) {
      throw_invalid(a.spec->id.str() + " says something outside a session");
    }
    json body{{"session", *a.session}, {"content", step["say"]}};
    if (step.contains("tags")) body["tags"] = step["tags"];
    if (step.contains("author_kind")) body["author_kind"] = step["author_kind"];
    call(a, "POST", "/v1/records", body);
  } else if (kind == "close") {
    if (!a.session) throw_invalid(a.spec->id.str() + " closes no session");
    call(a, "POST", "/v1/sessions/" + std::to_string(*a.session) + "/close",
         nullptr);
    a.session.reset();
  } else {
    ask(a, step);
  }
  ++a.next;
  return true;
}

ScenarioReport Runner::run() {
  report_.name = scenario_.name;
  report_.mode = mode_;

  TempDir dir;
  const std::string admin_token = random_token();
  HubConfig config;
  config.store.data_dir = dir.path();
  config.admin_token = admin_token;
  config.clock = clock_.as_clock();
  Hub hub(std::move(config));
  HubServer server(hub);
  server.start("127.0.0.1", 0);
  admin_ = std::make_unique<HubClient>("127.0.0.1", server.port(), admin_token);

  setup(server);
  while (std::any_of(agents_.begin(), agents_.end(),
                     [](const AgentRun& a) { return !a.done(); })) {
    ++round_;
    bool progressed = false;
    for (auto& a : agents_) {
      if (!a.done() && step(a)) progressed = true;
    }
    if (!progressed) {
      throw_invalid("scenario " + scenario_.name + " is deadlocked on awaits");
    }
    clock_.advance(kRoundMs);
  }

  // Every read the agents made must appear in the audit trail.
  std::size_t audited = 0;
  const json trail = admin_->call("GET", "/v1/audit", nullptr);
  for (const auto& e : trail["entries"]) {
    const auto agent = e["agent"].get<std::string>();
    if (agent != "admin" && kReadOperations.count(e["operation"]) &&
        e["decision"] != "unauthenticated") {
      ++audited;
    }
  }
  note(nullptr, "GET", "/v1/audit", 200, json(audited));
  AssertionOutcome coverage{"audit-coverage", "harness", audited == reads_,
                            true, audited, ""};
  coverage.detail = coverage.passed
                        ? "ok"
                        : std::to_string(audited) + " audited reads for " +
                              std::to_string(reads_) + " requests";
  report_.assertions.push_back(std::move(coverage));
  // Drop keep-alive connections first or stop() waits out their timeout.
  admin_.reset();
  for (auto& a : agents_) a.client.reset();
  server.stop();

  // Hub mode: every criterion passes. Isolated mode: exactly the listed
  // criteria fail.
  const auto& listed = scenario_.isolated_failures;
  bool as_documented = true;
  for (const auto& o : report_.assertions) {
    if (!o.criterion) continue;
    const bool expect_fail = mode_ == SimMode::kIsolated &&
                             std::count(listed.begin(), listed.end(), o.id) > 0;
    if (o.passed == expect_fail) as_documented = false;
  }
  if (!as_documented) {
    report_.outcome = ScenarioOutcome::kFail;
  } else if (mode_ == SimMode::kIsolated && !listed.empty()) {
    report_.outcome = ScenarioOutcome::kExpectedFailure;
  } else {
    report_.outcome = ScenarioOutcome::kPass;
  }
  return report_;
}

}  // namespace

std::string_view sim_mode_name(SimMode mode) {
  return mode == SimMode::kHub ? "hub" : "isolated";
}

SimMode sim_mode_from_name(std::string_view name) {
  if (name == "hub") return SimMode::kHub;
  if (name == "isolated") return SimMode::kIsolated;
  throw_invalid("mode must be hub or isolated");
}

std::string_view scenario_outcome_name(ScenarioOutcome outcome) {
  switch (outcome) {
    case ScenarioOutcome::kPass: return "PASS";
    case ScenarioOutcome::kFail: return "FAIL";
    case ScenarioOutcome::kExpectedFailure: return "EXPECTED_FAILURE";
  }
  return "FAIL";
}

const AssertionOutcome* ScenarioReport::find(const std::string& id) const {
  for (const auto& a : assertions) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

Scenario scenario_from_json(const json& j) {
  require_keys(j,
               {"name", "description", "agents", "policies", "pipeline",
                "scripts", "criteria", "isolated_failures"},
               "scenario");
  Scenario s;
  s.name = get_field<std::string>(j, "name");
  if (!is_valid_identifier(s.name)) throw_invalid("bad scenario name");
  s.description = get_optional<std::string>(j, "description").value_or("");

  std::set<std::string> agent_ids;
  for (const auto& a : get_field<json>(j, "agents")) {
    require_keys(a, {"id", "roles", "task_tags"}, "agent");
    SimAgent agent{AgentId(get_field<std::string>(a, "id")),
                   get_optional<TagSet>(a, "roles").value_or(TagSet{}),
                   get_optional<TagSet>(a, "task_tags").value_or(TagSet{})};
    validate_tags(agent.roles);
    validate_tags(agent.task_tags);
    if (!agent_ids.insert(agent.id.str()).second) {
      throw_invalid("duplicate agent " + agent.id.str());
    }
    s.agents.push_back(std::move(agent));
  }
  if (s.agents.empty()) throw_invalid("a scenario needs agents");

  std::set<std::string> groups;
  auto add_pipeline = [&](const PipelineSpec& pl) {
    for (const auto& st : pl.stages) {
      if (!agent_ids.count(st.str())) {
        throw_invalid("pipeline " + pl.workflow + " names unknown agent " +
                      st.str());
      }
    }
    groups.insert(pl.workflow);
  };
  if (j.contains("pipeline")) {
    for (const auto& p : get_field<json>(j, "pipeline")) {
      s.pipelines.push_back(pipeline_from_json(p));
      add_pipeline(s.pipelines.back());
    }
  }
  std::vector<AccessRule> rules;
  for (const auto& p : get_optional<json>(j, "policies").value_or(json::array())) {
    if (p.contains("pipeline")) {
      add_pipeline(pipeline_from_json(p["pipeline"]));
    } else {
      rules.push_back(rule_from_json(p));
    }
    s.policies.push_back(p);
  }
  for (const auto& r : rules) {
    if (r.subject.kind == Subject::Kind::kAgent &&
        !agent_ids.count(r.subject.name)) {
      throw_invalid("rule " + r.id + " names unknown agent " + r.subject.name);
    }
    if (r.subject.kind == Subject::Kind::kGroup && !groups.count(r.subject.name)) {
      throw_invalid("rule " + r.id + " names unknown group " + r.subject.name);
    }
  }

  std::map<std::string, std::set<std::string>> labels;
  std::set<std::string> ask_ids;
  const json scripts = get_field<json>(j, "scripts");
  if (!scripts.is_object()) throw_invalid("scripts must be an object");
  for (const auto& [agent, steps] : scripts.items()) {
    if (!agent_ids.count(agent)) throw_invalid("script for unknown agent " + agent);
    auto& out = s.scripts[agent];
    for (const auto& step : steps) {
      const auto kind = step_kind(step);
      check_step(step, kind);
      if (kind == "label") labels[agent].insert(step["label"].get<std::string>());
      if (kind == "ask" && !ask_ids.insert(step["id"].get<std::string>()).second) {
        throw_invalid("duplicate ask id " + step["id"].get<std::string>());
      }
      out.push_back(step);
    }
  }
  for (const auto& a : s.agents) s.scripts[a.id.str()];  // idle agents
  for (const auto& [agent, steps] : s.scripts) {
    for (const auto& step : steps) {
      if (!step.contains("await")) continue;
      const auto ref = parse_await(step["await"].get<std::string>());
      if (!labels[ref.agent].count(ref.label)) {
        throw_invalid(agent + " awaits unknown label " + ref.agent + ":" +
                      ref.label);
      }
    }
  }

  s.criteria = get_optional<std::vector<std::string>>(j, "criteria")
                   .value_or(std::vector<std::string>{});
  for (const auto& c : s.criteria) {
    if (!ask_ids.count(c)) throw_invalid("criterion names unknown ask " + c);
  }
  s.isolated_failures =
      get_optional<std::vector<std::string>>(j, "isolated_failures")
          .value_or(std::vector<std::string>{});
  for (const auto& c : s.isolated_failures) {
    if (std::find(s.criteria.begin(), s.criteria.end(), c) == s.criteria.end()) {
      throw_invalid("isolated failure " + c + " is not a criterion");
    }
  }
  return s;
}

json to_json(const ScenarioReport& r) {
  json assertions = json::array();
  for (const auto& a : r.assertions) {
    assertions.push_back(json{{"id", a.id},
                              {"agent", a.agent},
                              {"passed", a.passed},
                              {"criterion", a.criterion},
                              {"result_count", a.result_count},
                              {"detail", a.detail}});
  }
  return json{{"name", r.name},
              {"mode", sim_mode_name(r.mode)},
              {"outcome", scenario_outcome_name(r.outcome)},
              {"assertions", std::move(assertions)},
              {"transcript", r.transcript}};
}

namespace {

const std::map<std::string, Scenario>& builtins() {
  static const std::map<std::string, Scenario> all = [] {
    std::map<std::string, Scenario> out;
    for (auto src : builtin_scenario_sources()) {
      Scenario s = scenario_from_json(parse_json(src));
      const std::string name = s.name;
      out.emplace(name, std::move(s));
    }
    return out;
  }();
  return all;
}

}  // namespace

std::vector<std::string> list_scenarios() {
  std::vector<std::string> names;
  for (const auto& [name, s] : builtins()) names.push_back(name);
  return names;
}

Scenario builtin_scenario(const std::string& name) {
  auto it = builtins().find(name);
  if (it == builtins().end()) throw_not_found("no scenario named " + name);
  return it->second;
}

ScenarioReport run_scenario(const Scenario& scenario, SimMode mode) {
  return Runner(scenario, mode).run();
}

ScenarioReport run_scenario(const std::string& name, SimMode mode) {
  return run_scenario(builtin_scenario(name), mode);
}

}  // namespace memhub
