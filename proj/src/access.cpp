#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "memhub/access.hpp"
#include "memhub/error.hpp"
#include "memhub/text.hpp"

namespace memhub {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSelf = "${self}";
constexpr const char* kTaskTags = "${task_tags}";
constexpr const char* kPredecessor = "${predecessor}";
constexpr const char* kWorkflow = "${workflow}";

struct TemplateContext {
  const Principal* principal;
  const PipelineSpec* pipeline = nullptr;
};

std::optional<std::string> predecessor_of(const Principal& p,
                                          const PipelineSpec& pipeline) {
  for (std::size_t i = 1; i < pipeline.stages.size(); ++i) {
    if (pipeline.stages[i] == p.agent) return pipeline.stages[i - 1].str();
  }
  return std::nullopt;
}

bool is_member(const Principal& p, const PipelineSpec& pipeline) {
  return std::find(pipeline.stages.begin(), pipeline.stages.end(), p.agent) !=
         pipeline.stages.end();
}

// Expands placeholders inside a string set; false when one cannot be
// resolved for this principal.
bool expand(std::set<std::string>& values, const TemplateContext& ctx) {
  std::set<std::string> out;
  for (const auto& v : values) {
    if (v == kSelf) {
      out.insert(ctx.principal->agent.str());
    } else if (v == kTaskTags) {
      if (ctx.principal->task_tags.empty()) return false;
      out.insert(ctx.principal->task_tags.begin(),
                 ctx.principal->task_tags.end());
    } else if (v == kPredecessor) {
      if (!ctx.pipeline) return false;
      auto prev = predecessor_of(*ctx.principal, *ctx.pipeline);
      if (!prev) return false;
      out.insert(*prev);
    } else if (v == kWorkflow) {
      if (!ctx.pipeline) return false;
      out.insert(ctx.pipeline->workflow);
    } else {
      out.insert(v);
    }
  }
  values = std::move(out);
  return true;
}

bool instantiate(StructuredPredicate& pred, const TemplateContext& ctx) {
  if (pred.agents && !expand(*pred.agents, ctx)) return false;
  if (pred.has_all_tags && !expand(*pred.has_all_tags, ctx)) return false;
  if (pred.has_any_tags && !expand(*pred.has_any_tags, ctx)) return false;
  if (pred.has_tag) {
    std::set<std::string> one{*pred.has_tag};
    if (!expand(one, ctx) || one.size() != 1) return false;
    pred.has_tag = *one.begin();
  }
  if (pred.any_of) {
    for (auto& sub : *pred.any_of) {
      if (!instantiate(sub, ctx)) return false;
    }
  }
  for (auto& sub : pred.all_of) {
    if (!instantiate(sub, ctx)) return false;
  }
  return true;
}

bool subject_matches(const Subject& subject, const Principal& p,
                     const PipelineSpec* group) {
  switch (subject.kind) {
    case Subject::Kind::kRole: return p.roles.count(subject.name) > 0;
    case Subject::Kind::kAgent: return p.agent.str() == subject.name;
    case Subject::Kind::kGroup: return group && is_member(p, *group);
  }
  return false;
}

void write_all(int fd, const std::string& data) {
  const char* ptr = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, ptr, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kInternal, "audit write failed");
    }
    ptr += n;
    left -= static_cast<std::size_t>(n);
  }
}

}  // namespace

std::string digest_of(const json& value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(value.dump())));
  return buf;
}

StructuredPredicate task_scope(const Principal& p) {
  if (p.task_tags.empty()) {
    throw_invalid("principal " + p.agent.str() + " has no task tags");
  }
  StructuredPredicate pred;
  pred.has_any_tags = p.task_tags;
  return pred;
}

StructuredPredicate pipeline_predecessor_scope(const Principal& p,
                                               const PipelineSpec& pipeline) {
  if (!is_member(p, pipeline)) {
    throw_invalid(p.agent.str() + " is not a member of workflow " +
                  pipeline.workflow);
  }
  StructuredPredicate pred;
  pred.has_tag = pipeline.workflow;
  if (pipeline.mode == CollabMode::kParallel) {
    pred.agents.emplace();
    for (const auto& a : pipeline.stages) pred.agents->insert(a.str());
    return pred;
  }
  auto prev = predecessor_of(p, pipeline);
  if (!prev) {
    throw_invalid(p.agent.str() + " is the first stage of workflow " +
                  pipeline.workflow + " and has no predecessor");
  }
  pred.agents = std::set<std::string>{*prev};
  return pred;
}

// --- AuditLog ----------------------------------------------------------------

AuditLog::AuditLog(std::optional<fs::path> path, Clock clock)
    : clock_(clock ? std::move(clock) : system_clock()) {
  if (!path) return;
  if (fs::exists(*path)) {
    std::ifstream in(*path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    std::size_t good = 0;
    while (good < text.size()) {
      const auto nl = text.find('\n', good);
      if (nl == std::string::npos) break;  // torn final line
      try {
        entries_.push_back(
            audit_entry_from_json(json::parse(text.substr(good, nl - good))));
      } catch (const std::exception&) {
        break;
      }
      good = nl + 1;
    }
    if (good < text.size()) fs::resize_file(*path, good);
  }
  fd_ = ::open(path->c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw Error(ErrorCode::kInternal, "cannot open audit log " + path->string());
  }
}

AuditLog::~AuditLog() {
  if (fd_ >= 0) ::close(fd_);
}

AuditEntry AuditLog::append(std::string agent, std::string operation,
                            std::string digest, std::string decision,
                            std::size_t records_returned) {
  std::lock_guard lock(mutex_);
  TimestampMs ts = clock_();
  // Strictly increasing, so ts alone orders the trail.
  if (!entries_.empty()) ts = std::max(ts, entries_.back().ts + 1);
  AuditEntry entry{entries_.empty() ? 1 : entries_.back().id + 1,
                   ts,
                   std::move(agent),
                   std::move(operation),
                   std::move(digest),
                   std::move(decision),
                   records_returned};
  if (fd_ >= 0) write_all(fd_, to_json(entry).dump() + "\n");
  entries_.push_back(entry);
  return entry;
}

std::vector<AuditEntry> AuditLog::entries(const AuditFilter& filter) const {
  std::lock_guard lock(mutex_);
  std::vector<AuditEntry> out;
  for (const auto& e : entries_) {
    if (filter.agent && e.agent != *filter.agent) continue;
    if (filter.operation && e.operation != *filter.operation) continue;
    if (filter.decision && e.decision != *filter.decision) continue;
    out.push_back(e);
  }
  if (filter.tail && out.size() > *filter.tail) {
    out.erase(out.begin(), out.end() - static_cast<std::ptrdiff_t>(*filter.tail));
  }
  return out;
}

std::size_t AuditLog::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

// --- QuotaMeter --------------------------------------------------------------

void QuotaMeter::prune(std::deque<std::pair<TimestampMs, std::uint64_t>>& ev,
                       TimestampMs now) {
  while (!ev.empty() && ev.front().first <= now - kWindowMs) ev.pop_front();
}

std::uint64_t QuotaMeter::used(const std::string& agent, TimestampMs now) {
  std::lock_guard lock(mutex_);
  auto& ev = events_[agent];
  prune(ev, now);
  std::uint64_t total = 0;
  for (const auto& [ts, n] : ev) total += n;
  return total;
}

std::uint64_t QuotaMeter::consume(const std::string& agent, std::uint64_t n,
                                  std::uint64_t max, TimestampMs now) {
  std::lock_guard lock(mutex_);
  auto& ev = events_[agent];
  prune(ev, now);
  std::uint64_t total = 0;
  for (const auto& [ts, count] : ev) total += count;
  if (total + n > max) {
    throw Error(ErrorCode::kQuotaExceeded,
                "quota of " + std::to_string(max) +
                    " records per minute exceeded for " + agent);
  }
  if (n > 0) ev.emplace_back(now, n);
  return max - total - n;
}

// --- Authorization -----------------------------------------------------------

Authorization::Authorization(AccessEngine* engine, Principal principal,
                             RequestInfo info, AccessDecision decision)
    : engine_(engine),
      principal_(std::move(principal)),
      info_(std::move(info)),
      decision_(std::move(decision)) {}

Authorization::Authorization(Authorization&& other) noexcept
    : engine_(other.engine_),
      principal_(std::move(other.principal_)),
      info_(std::move(other.info_)),
      decision_(std::move(other.decision_)),
      quota_max_(other.quota_max_),
      done_(other.done_) {
  other.done_ = true;
}

Authorization::~Authorization() {
  if (!done_) {
    try {
      commit(decision_.allow ? "allow" : "deny", 0);
    } catch (...) {
    }
  }
}

void Authorization::commit(const std::string& outcome, std::size_t records) {
  done_ = true;
  engine_->audit_.append(principal_.agent.str(), info_.operation, info_.digest,
                         outcome, records);
}

void Authorization::require_allowed() {
  if (decision_.allow) return;
  if (!done_) commit("deny", 0);
  throw Error(ErrorCode::kForbidden, principal_.agent.str() +
                                         " may not perform " + info_.operation);
}

std::size_t Authorization::admit(std::size_t k) {
  require_allowed();
  if (!quota_max_) return k;
  const auto used = engine_->quotas_.used(principal_.agent.str(),
                                          engine_->options_.clock());
  const std::uint64_t left = used >= *quota_max_ ? 0 : *quota_max_ - used;
  decision_.quota_remaining = static_cast<std::int64_t>(left);
  if (left == 0) {
    if (!done_) commit("quota_exceeded", 0);
    throw Error(ErrorCode::kQuotaExceeded,
                "quota exhausted for " + principal_.agent.str());
  }
  return std::min<std::size_t>(k, left);
}

void Authorization::complete(std::size_t records_returned) {
  if (done_) return;
  if (quota_max_ && decision_.allow) {
    try {
      const auto left = engine_->quotas_.consume(
          principal_.agent.str(), records_returned, *quota_max_,
          engine_->options_.clock());
      decision_.quota_remaining = static_cast<std::int64_t>(left);
    } catch (const Error&) {
      commit("quota_exceeded", 0);
      throw;
    }
  }
  commit(decision_.allow ? "allow" : "deny", records_returned);
}

// --- AccessEngine ------------------------------------------------------------

AccessEngine::AccessEngine(AccessEngineOptions options)
    : options_(std::move(options)),
      audit_(options_.audit_file, options_.clock) {
  if (!options_.clock) options_.clock = system_clock();
  if (!options_.head_seq) options_.head_seq = [] { return Seq{0}; };
  load();
}

AccessEngine::Evaluation AccessEngine::evaluate(const Principal& p) const {
  Evaluation out;
  if (p.admin) {
    out.decision.allow = true;
    out.decision.mandatory_predicate = StructuredPredicate::match_all();
    return out;
  }
  std::shared_lock lock(rules_mutex_);
  std::vector<std::string> denies;
  std::vector<std::string> allows;
  std::vector<StructuredPredicate> scopes;
  bool unconstrained = false;
  for (const auto& rule : rules_) {
    const PipelineSpec* group = nullptr;
    if (rule.subject.kind == Subject::Kind::kGroup) {
      for (const auto& pl : pipelines_) {
        if (pl.workflow == rule.subject.name) group = &pl;
      }
    }
    if (!subject_matches(rule.subject, p, group)) continue;

    TemplateContext ctx{&p, group};
    StructuredPredicate scope = rule.scope;
    if (!instantiate(scope, ctx)) continue;
    try {
      if (rule.strategy == Strategy::kTask) {
        scope = conjoin(scope, task_scope(p));
      } else if (rule.strategy == Strategy::kCollabParallel ||
                 rule.strategy == Strategy::kCollabSequential) {
        if (!group) continue;
        PipelineSpec effective = *group;
        effective.mode = rule.strategy == Strategy::kCollabParallel
                             ? CollabMode::kParallel
                             : CollabMode::kSequential;
        scope = conjoin(scope, pipeline_predecessor_scope(p, effective));
      }
    } catch (const Error&) {
      continue;  // rule does not apply to this principal
    }
    if (rule.recent_window) {
      const Seq head = options_.head_seq();
      StructuredPredicate recent;
      const Seq lo = head >= *rule.recent_window ? head - *rule.recent_window + 1
                                                 : 1;
      recent.seq = Range<Seq>{lo, std::max<Seq>(head, lo)};
      scope = conjoin(scope, recent);
    }

    if (rule.effect == Effect::kDeny) {
      denies.push_back(rule.id);
      continue;
    }
    allows.push_back(rule.id);
    if (scope.empty()) unconstrained = true;
    scopes.push_back(std::move(scope));
    if (rule.quota && (!out.quota_max ||
                       rule.quota->max_records_per_minute < *out.quota_max)) {
      out.quota_max = rule.quota->max_records_per_minute;
    }
  }

  if (!denies.empty()) {
    out.decision.matched_rules = std::move(denies);
    out.quota_max.reset();
    return out;
  }
  if (allows.empty()) return out;

  out.decision.allow = true;
  out.decision.matched_rules = std::move(allows);
  if (unconstrained) {
    out.decision.mandatory_predicate = StructuredPredicate::match_all();
  } else if (scopes.size() == 1) {
    out.decision.mandatory_predicate = std::move(scopes.front());
  } else {
    StructuredPredicate any;
    any.any_of = std::move(scopes);
    out.decision.mandatory_predicate = std::move(any);
  }
  return out;
}

Authorization AccessEngine::authorize(const Principal& p, RequestInfo request) {
  Evaluation ev = evaluate(p);
  if (ev.quota_max) {
    const auto used = quotas_.used(p.agent.str(), options_.clock());
    ev.decision.quota_remaining = static_cast<std::int64_t>(
        used >= *ev.quota_max ? 0 : *ev.quota_max - used);
  }
  Authorization auth(this, p, std::move(request), std::move(ev.decision));
  auth.quota_max_ = ev.quota_max;
  return auth;
}

std::optional<std::int64_t> AccessEngine::check_and_consume_quota(
    const Principal& p, std::size_t n) {
  const Evaluation ev = evaluate(p);
  if (!ev.decision.allow) {
    throw Error(ErrorCode::kForbidden, p.agent.str() + " has no access");
  }
  if (!ev.quota_max) return std::nullopt;
  return static_cast<std::int64_t>(
      quotas_.consume(p.agent.str(), n, *ev.quota_max, options_.clock()));
}

void AccessEngine::require_admin(const Principal& p,
                                 const std::string& operation,
                                 const std::string& digest) {
  if (p.admin) {
    audit_.append(p.agent.str(), operation, digest, "allow", 0);
    return;
  }
  audit_.append(p.agent.str(), operation, digest, "deny", 0);
  throw Error(ErrorCode::kForbidden, operation + " requires an admin");
}

namespace {

void validate_rule(const AccessRule& rule) {
  if (!is_valid_identifier(rule.id)) {
    throw_invalid("invalid rule id '" + rule.id + "'");
  }
  if (rule.subject.name.empty()) throw_invalid("rule subject is empty");
  if (rule.effect == Effect::kDeny && rule.quota) {
    throw_invalid("deny rules carry no quota");
  }
  if (rule.quota && rule.quota->max_records_per_minute == 0) {
    throw_invalid("quota must be positive");
  }
  if (rule.recent_window && *rule.recent_window == 0) {
    throw_invalid("recent_window must be positive");
  }
  const bool collab = rule.strategy == Strategy::kCollabParallel ||
                      rule.strategy == Strategy::kCollabSequential;
  if (collab && rule.subject.kind != Subject::Kind::kGroup) {
    throw_invalid("collaboration rules need a group subject");
  }
  validate(rule.scope);
}

void validate_pipeline(const PipelineSpec& pl) {
  if (!is_valid_identifier(pl.workflow)) {
    throw_invalid("invalid workflow id '" + pl.workflow + "'");
  }
  if (pl.stages.size() < 2) throw_invalid("a pipeline needs at least 2 stages");
  std::set<AgentId> seen(pl.stages.begin(), pl.stages.end());
  if (seen.size() != pl.stages.size()) {
    throw_invalid("pipeline stages must be distinct");
  }
}

}  // namespace

void AccessEngine::add_rule(const Principal& admin, AccessRule rule) {
  require_admin(admin, "policy.add", digest_of(to_json(rule)));
  validate_rule(rule);
  std::unique_lock lock(rules_mutex_);
  for (const auto& r : rules_) {
    if (r.id == rule.id) throw_invalid("duplicate rule id '" + rule.id + "'");
  }
  for (const auto& pl : pipelines_) {
    if (pl.workflow == rule.id) {
      throw_invalid("id '" + rule.id + "' already names a pipeline");
    }
  }
  rules_.push_back(std::move(rule));
  persist();
}

void AccessEngine::remove_rule(const Principal& admin, const std::string& id) {
  require_admin(admin, "policy.remove", digest_of(json(id)));
  std::unique_lock lock(rules_mutex_);
  const auto before = rules_.size() + pipelines_.size();
  std::erase_if(rules_, [&](const auto& r) { return r.id == id; });
  std::erase_if(pipelines_, [&](const auto& p) { return p.workflow == id; });
  if (rules_.size() + pipelines_.size() == before) {
    throw_not_found("no policy with id '" + id + "'");
  }
  persist();
}

void AccessEngine::add_pipeline(const Principal& admin, PipelineSpec pipeline) {
  require_admin(admin, "policy.add", digest_of(to_json(pipeline)));
  validate_pipeline(pipeline);
  std::unique_lock lock(rules_mutex_);
  for (const auto& pl : pipelines_) {
    if (pl.workflow == pipeline.workflow) {
      throw_invalid("duplicate pipeline '" + pipeline.workflow + "'");
    }
  }
  for (const auto& r : rules_) {
    if (r.id == pipeline.workflow) {
      throw_invalid("id '" + r.id + "' already names a rule");
    }
  }
  pipelines_.push_back(std::move(pipeline));
  persist();
}

std::vector<AccessRule> AccessEngine::rules() const {
  std::shared_lock lock(rules_mutex_);
  return rules_;
}

std::vector<PipelineSpec> AccessEngine::pipelines() const {
  std::shared_lock lock(rules_mutex_);
  return pipelines_;
}

std::vector<AuditEntry> AccessEngine::read_audit(const Principal& admin,
                                                 const AuditFilter& filter) {
  // The read itself is audited after the snapshot is taken.
  if (!admin.admin) {
    audit_.append(admin.agent.str(), "audit.read", "", "deny", 0);
    throw Error(ErrorCode::kForbidden, "reading the audit log requires an admin");
  }
  auto entries = audit_.entries(filter);
  audit_.append(admin.agent.str(), "audit.read", "", "allow", entries.size());
  return entries;
}

void AccessEngine::audit_event(const std::string& agent,
                               const std::string& operation,
                               const std::string& digest,
                               const std::string& decision) {
  audit_.append(agent, operation, digest, decision, 0);
}

void AccessEngine::persist() const {
  if (!options_.policy_file) return;
  json rules = json::array();
  for (const auto& r : rules_) rules.push_back(to_json(r));
  json pipelines = json::array();
  for (const auto& p : pipelines_) pipelines.push_back(to_json(p));
  const json doc{{"rules", std::move(rules)}, {"pipelines", std::move(pipelines)}};
  const fs::path tmp = options_.policy_file->string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << doc.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::kInternal, "cannot write policy file");
  }
  fs::rename(tmp, *options_.policy_file);
}

void AccessEngine::load() {
  if (!options_.policy_file || !fs::exists(*options_.policy_file)) return;
  std::ifstream in(*options_.policy_file);
  std::stringstream buf;
  buf << in.rdbuf();
  const json doc = parse_json(buf.str());
  for (const auto& r : doc.value("rules", json::array())) {
    rules_.push_back(rule_from_json(r));
  }
  for (const auto& p : doc.value("pipelines", json::array())) {
    pipelines_.push_back(pipeline_from_json(p));
  }
}

// --- JSON --------------------------------------------------------------------

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kRole: return "role";
    case Strategy::kTask: return "task";
    case Strategy::kAutonomous: return "autonomous";
    case Strategy::kCollabParallel: return "collab_parallel";
    case Strategy::kCollabSequential: return "collab_sequential";
  }
  return "role";
}

namespace {

Strategy strategy_from_name(std::string_view name) {
  for (auto s : {Strategy::kRole, Strategy::kTask, Strategy::kAutonomous,
                 Strategy::kCollabParallel, Strategy::kCollabSequential}) {
    if (strategy_name(s) == name) return s;
  }
  throw_invalid("unknown strategy '" + std::string(name) + "'");
}

const char* subject_key(Subject::Kind kind) {
  switch (kind) {
    case Subject::Kind::kRole: return "role";
    case Subject::Kind::kAgent: return "agent";
    case Subject::Kind::kGroup: return "group";
  }
  return "role";
}

}  // namespace

json to_json(const AccessRule& r) {
  json j{{"id", r.id},
         {"strategy", strategy_name(r.strategy)},
         {"subject", json{{subject_key(r.subject.kind), r.subject.name}}},
         {"effect", r.effect == Effect::kAllow ? "allow" : "deny"},
         {"scope", to_json(r.scope)}};
  if (r.quota) {
    j["quota"] = json{{"max_records_per_minute", r.quota->max_records_per_minute}};
  }
  if (r.recent_window) j["recent_window"] = *r.recent_window;
  return j;
}

AccessRule rule_from_json(const json& j) {
  require_keys(j,
               {"id", "strategy", "subject", "effect", "scope", "quota",
                "recent_window"},
               "rule");
  AccessRule r;
  r.id = get_field<std::string>(j, "id");
  r.strategy = strategy_from_name(get_field<std::string>(j, "strategy"));
  const json subject = get_field<json>(j, "subject");
  require_keys(subject, {"role", "agent", "group"}, "subject");
  if (subject.size() != 1) {
    throw_invalid("subject must name exactly one of role, agent, group");
  }
  for (auto kind : {Subject::Kind::kRole, Subject::Kind::kAgent,
                    Subject::Kind::kGroup}) {
    if (subject.contains(subject_key(kind))) {
      r.subject = Subject{kind, get_field<std::string>(subject, subject_key(kind))};
    }
  }
  const auto effect = get_field<std::string>(j, "effect");
  if (effect == "allow") {
    r.effect = Effect::kAllow;
  } else if (effect == "deny") {
    r.effect = Effect::kDeny;
  } else {
    throw_invalid("effect must be allow or deny");
  }
  if (j.contains("scope")) r.scope = predicate_from_json(j["scope"]);
  if (j.contains("quota") && !j["quota"].is_null()) {
    const json& q = j["quota"];
    require_keys(q, {"max_records_per_minute"}, "quota");
    const auto max = get_field<std::int64_t>(q, "max_records_per_minute");
    if (max < 1) throw_invalid("quota must be positive");
    r.quota = Quota{static_cast<std::uint64_t>(max)};
  }
  if (auto w = get_optional<std::int64_t>(j, "recent_window")) {
    if (*w < 1) throw_invalid("recent_window must be positive");
    r.recent_window = static_cast<std::uint64_t>(*w);
  }
  validate_rule(r);
  return r;
}

json to_json(const PipelineSpec& p) {
  json stages = json::array();
  for (const auto& s : p.stages) stages.push_back(s.str());
  return json{{"workflow", p.workflow},
              {"stages", std::move(stages)},
              {"mode", p.mode == CollabMode::kSequential ? "sequential"
                                                        : "parallel"}};
}

PipelineSpec pipeline_from_json(const json& j) {
  require_keys(j, {"workflow", "stages", "mode"}, "pipeline");
  PipelineSpec p;
  p.workflow = get_field<std::string>(j, "workflow");
  for (const auto& s : get_field<std::vector<std::string>>(j, "stages")) {
    p.stages.emplace_back(s);
  }
  const auto mode = get_optional<std::string>(j, "mode").value_or("sequential");
  if (mode == "sequential") {
    p.mode = CollabMode::kSequential;
  } else if (mode == "parallel") {
    p.mode = CollabMode::kParallel;
  } else {
    throw_invalid("pipeline mode must be sequential or parallel");
  }
  validate_pipeline(p);
  return p;
}

json to_json(const AccessDecision& d) {
  return json{{"allow", d.allow},
              {"mandatory_predicate", to_json(d.mandatory_predicate)},
              {"quota_remaining",
               d.quota_remaining ? json(*d.quota_remaining) : json(nullptr)},
              {"matched_rules", d.matched_rules}};
}

json to_json(const AuditEntry& e) {
  return json{{"id", e.id},
              {"ts", e.ts},
              {"agent", e.agent},
              {"operation", e.operation},
              {"digest", e.digest},
              {"decision", e.decision},
              {"records_returned", e.records_returned}};
}

AuditEntry audit_entry_from_json(const json& j) {
  return AuditEntry{get_field<std::uint64_t>(j, "id"),
                    get_field<TimestampMs>(j, "ts"),
                    get_field<std::string>(j, "agent"),
                    get_field<std::string>(j, "operation"),
                    get_field<std::string>(j, "digest"),
                    get_field<std::string>(j, "decision"),
                    get_field<std::size_t>(j, "records_returned")};
}

}  // namespace memhub
