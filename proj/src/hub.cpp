#include <algorithm>
#include <charconv>

#include "memhub/curator.hpp"
#include "memhub/episodic.hpp"
#include "memhub/hub.hpp"
#include "memhub/retrieval.hpp"
#include "memhub/window.hpp"

namespace memhub {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    if (path[i] == '/') {
      ++i;
      continue;
    }
    const auto j = path.find('/', i);
    parts.push_back(path.substr(i, j == std::string::npos ? j : j - i));
    if (j == std::string::npos) break;
    i = j;
  }
  return parts;
}

std::uint64_t parse_id(const std::string& s, const char* what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v == 0) {
    throw_invalid(std::string("invalid ") + what + " '" + s + "'");
  }
  return v;
}

std::optional<std::string> param(const QueryParams& params, const char* key) {
  auto it = params.find(key);
  if (it == params.end()) return std::nullopt;
  return it->second;
}

const json& object_body(const json& body) {
  if (!body.is_object()) throw_invalid("request body must be a JSON object");
  return body;
}

// Records of a session the scope lets through.
std::vector<MemoryRecord> visible_records(const StoreView& view,
                                          const SessionState& s,
                                          const StructuredPredicate& scope) {
  std::vector<MemoryRecord> out;
  for (Seq seq : s.records) {
    const MemoryRecord* r = view.find(seq);
    if (r && matches(scope, *r)) out.push_back(*r);
  }
  return out;
}

// Episode as the scope sees it; nullopt when nothing of it is visible. An
// unconstrained scope also sees sessions with no records.
std::optional<Episode> scoped_episode(const StoreView& view,
                                      const SessionState& s,
                                      const StructuredPredicate& scope) {
  Episode e = view.episode(s);
  if (scope.empty()) return e;
  e.records = visible_records(view, s, scope);
  if (e.records.empty()) return std::nullopt;
  return e;
}

EpisodeSummary summarize(const Episode& e) {
  EpisodeSummary s{e.id,        e.agent, e.task_tags, e.opened_ts,
                   e.closed_ts, e.open,  e.records.size(), {}, {}};
  if (!e.records.empty()) {
    s.first_seq = e.records.front().seq;
    s.last_seq = e.records.back().seq;
  }
  return s;
}

}  // namespace

std::string operation_for(const std::string& method, const std::string& path) {
  const auto parts = split_path(path);
  if (parts.size() < 2 || parts[0] != "v1") return "unknown";
  const std::string& res = parts[1];
  if (res == "sessions") {
    return parts.size() == 4 ? "session.close" : "session.begin";
  }
  if (res == "records") {
    return method == "GET" ? "record.get" : "record.append";
  }
  if (res == "episodes") {
    return parts.size() == 3 ? "episode.get" : "episode.list";
  }
  if (res == "query" || res == "window" || res == "recall" || res == "curate") {
    return res;
  }
  if (res == "policies") {
    if (method == "DELETE") return "policy.remove";
    return method == "GET" ? "policy.list" : "policy.add";
  }
  if (res == "audit") return "audit.read";
  if (res == "tokens") {
    return method == "DELETE" ? "token.revoke" : "token.issue";
  }
  return "unknown";
}

Hub::Hub(HubConfig config) : config_(std::move(config)) {
  if (!config_.clock) config_.clock = system_clock();
  store_ = std::make_unique<Store>(
      config_.store, StoreOptions{config_.embedder, config_.clock});
  const fs::path dir = config_.store.data_dir;
  Store* store = store_.get();
  access_ = std::make_unique<AccessEngine>(AccessEngineOptions{
      dir / "policies.json", dir / "audit.jsonl", config_.clock,
      [store] { return store->last_seq(); }});
  tokens_ = std::make_unique<TokenRegistry>(dir / "tokens.json");
  if (config_.admin_token) {
    tokens_->add_bootstrap(*config_.admin_token, AgentId(config_.admin_agent));
  }
}

Principal Hub::authenticate(std::string_view bearer,
                            const std::string& operation,
                            const std::optional<TagSet>& task_tags) {
  std::optional<TokenInfo> info;
  if (!bearer.empty()) info = tokens_->verify(bearer);
  if (!info) {
    access_->audit_event("anonymous", operation, "", "unauthenticated");
    throw Error(ErrorCode::kUnauthenticated, "missing or invalid bearer token");
  }
  Principal p{info->agent, info->roles, info->task_tags, info->admin};
  if (task_tags) {
    for (const auto& t : *task_tags) {
      if (!info->task_tags.count(t)) {
        access_->audit_event(info->agent.str(), operation, "", "deny");
        throw Error(ErrorCode::kForbidden,
                    "task tag '" + t + "' is not bound to this token");
      }
    }
    p.task_tags = *task_tags;
  }
  return p;
}

Principal Hub::local_admin() const {
  return Principal{AgentId(config_.admin_agent), {}, {}, true};
}

void Hub::authorize_write(const Principal& p, const std::string& operation,
                          const json& body, bool owner) {
  const bool ok = p.admin || owner;
  access_->audit_event(p.agent.str(), operation, digest_of(body),
                       ok ? "allow" : "deny");
  if (!ok) {
    throw Error(ErrorCode::kForbidden,
                p.agent.str() + " may not perform " + operation + " here");
  }
}

json Hub::dispatch(const Principal& p, const std::string& method,
                   const std::string& path, const QueryParams& params,
                   const json& body) {
  const auto parts = split_path(path);
  const auto n = parts.size();
  if (n >= 2 && parts[0] == "v1") {
    const std::string& res = parts[1];
    if (method == "POST") {
      if (res == "sessions" && n == 2) return begin_session(p, body);
      if (res == "sessions" && n == 4 && parts[3] == "close") {
        return close_session(p, parse_id(parts[2], "session id"));
      }
      if (n == 2) {
        if (res == "records") return append(p, body);
        if (res == "query") return query(p, body);
        if (res == "window") return window(p, body);
        if (res == "recall") return recall(p, body);
        if (res == "curate") return curate(p, body);
        if (res == "policies") return add_policy(p, body);
        if (res == "tokens") return issue_token(p, body);
      }
    } else if (method == "GET") {
      if (res == "records" && n == 3) {
        return get_record(p, parse_id(parts[2], "seq"));
      }
      if (res == "episodes" && n == 2) return list_episodes(p, params);
      if (res == "episodes" && n == 3) {
        return get_episode(p, parse_id(parts[2], "episode id"));
      }
      if (res == "policies" && n == 2) return list_policies(p);
      if (res == "audit" && n == 2) return audit(p, params);
    } else if (method == "DELETE" && n == 3) {
      if (res == "policies") return remove_policy(p, parts[2]);
      if (res == "tokens") return revoke_token(p, parts[2]);
    }
  }
  throw_not_found("no route for " + method + " " + path);
}

json Hub::begin_session(const Principal& p, const json& body) {
  const json& b = body.is_null() ? json::object() : object_body(body);
  require_keys(b, {"agent", "task_tags"}, "session request");
  const AgentId owner(
      get_optional<std::string>(b, "agent").value_or(p.agent.str()));
  const TagSet tags = get_optional<TagSet>(b, "task_tags").value_or(TagSet{});
  validate_tags(tags);
  authorize_write(p, "session.begin", b, owner == p.agent);
  return json{{"session", store_->begin_session(owner, tags)}};
}

json Hub::close_session(const Principal& p, SessionId id) {
  const AgentId owner = [&] {
    const auto view = store_->view();
    const SessionState* s = view.session(id);
    if (!s) throw_not_found("unknown session " + std::to_string(id));
    return s->agent;
  }();
  authorize_write(p, "session.close", json{{"session", id}}, owner == p.agent);
  const auto episode = store_->close_session(id);
  if (!episode) return json{{"session", id}, {"empty", true}};
  return to_json(*episode);
}

json Hub::append(const Principal& p, const json& body) {
  const json& b = object_body(body);
  require_keys(b,
               {"session", "author_kind", "agent", "content", "metadata",
                "tags", "embedding"},
               "record request");
  const auto session = get_field<SessionId>(b, "session");
  const AuthorKind kind = author_kind_from_name(
      get_optional<std::string>(b, "author_kind").value_or("agent"));
  const AgentId author(
      get_optional<std::string>(b, "agent").value_or(p.agent.str()));
  AppendOptions opts;
  opts.extra_tags = get_optional<TagSet>(b, "tags").value_or(TagSet{});
  validate_tags(opts.extra_tags);
  opts.embedding = get_optional<std::vector<float>>(b, "embedding");
  const Metadata metadata =
      get_optional<Metadata>(b, "metadata").value_or(Metadata{});
  std::string content = get_field<std::string>(b, "content");

  const AgentId owner = [&] {
    const auto view = store_->view();
    const SessionState* s = view.session(session);
    if (!s) throw_not_found("unknown session " + std::to_string(session));
    return s->agent;
  }();
  // Non-admins write only into their own sessions and only as themselves.
  authorize_write(p, "record.append", b,
                  owner == p.agent && author == p.agent);
  return to_json(store_->append(session, kind, author, std::move(content),
                                metadata, std::move(opts)));
}

json Hub::get_record(const Principal& p, Seq seq) {
  auto auth = access_->authorize(p, {"record.get", digest_of(json(seq))});
  auth.admit(1);
  const auto& scope = auth.decision().mandatory_predicate;
  std::optional<MemoryRecord> record;
  {
    const auto view = store_->view();
    const MemoryRecord* r = view.find(seq);
    if (r && matches(scope, *r)) record = *r;
  }
  if (!record) {
    auth.complete(0);
    throw_not_found("unknown record " + std::to_string(seq));
  }
  auth.complete(1);
  return to_json(*record);
}

json Hub::list_episodes(const Principal& p, const QueryParams& params) {
  StructuredPredicate filter;
  if (auto f = param(params, "filter")) {
    filter = predicate_from_json(parse_json(*f));
    validate(filter);
  }
  auto auth = access_->authorize(
      p, {"episode.list", digest_of(to_json(filter))});
  auth.require_allowed();
  const auto& scope = auth.decision().mandatory_predicate;
  json out = json::array();
  {
    const auto view = store_->view();
    for (const auto& [id, s] : view.sessions()) {
      auto e = scoped_episode(view, s, scope);
      if (!e || !matches(filter, *e)) continue;
      out.push_back(to_json(summarize(*e)));
    }
  }
  auth.complete(0);
  return json{{"episodes", std::move(out)}};
}

json Hub::get_episode(const Principal& p, EpisodeId id) {
  auto auth = access_->authorize(p, {"episode.get", digest_of(json(id))});
  auth.require_allowed();
  const auto& scope = auth.decision().mandatory_predicate;
  std::optional<Episode> e;
  {
    const auto view = store_->view();
    if (const SessionState* s = view.session(id)) {
      e = scoped_episode(view, *s, scope);
    }
  }
  if (!e) {
    auth.complete(0);
    throw_not_found("unknown episode " + std::to_string(id));
  }
  const auto n = auth.admit(std::max<std::size_t>(e->records.size(), 1));
  if (e->records.size() > n) {
    e->records.erase(e->records.begin() + static_cast<long>(n), e->records.end());
  }
  auth.complete(e->records.size());
  return to_json(*e);
}

json Hub::query(const Principal& p, const json& body) {
  HybridQuery q = hybrid_query_from_json(object_body(body));
  auto auth = access_->authorize(p, {"query", digest_of(to_json(q))});
  q.k = auth.admit(q.k);
  q.predicate = conjoin(q.predicate, auth.decision().mandatory_predicate);
  json results = json::array();
  {
    const auto view = store_->view();
    for (const auto& r : hybrid_search(view, q)) {
      json item = to_json(RankedResult{r})["results"][0];
      item["record"] = to_json(*view.find(r.seq));
      results.push_back(std::move(item));
    }
  }
  auth.complete(results.size());
  return json{{"results", std::move(results)}};
}

json Hub::window(const Principal& p, const json& body) {
  const WindowRequest req = window_request_from_json(object_body(body));
  auto auth = access_->authorize(p, {"window", digest_of(body)});
  auth.require_allowed();
  const auto& scope = auth.decision().mandatory_predicate;
  WindowView w;
  {
    const auto view = store_->view();
    const SessionState* s = view.session(req.target);
    if (!s) {
      auth.complete(0);
      throw_not_found("unknown session " + std::to_string(req.target));
    }
    if (req.episode_target && s->open()) {
      auth.complete(0);
      throw_invalid("episode " + std::to_string(req.target) + " is still open");
    }
    auto records = visible_records(view, *s, scope);
    const auto n = auth.admit(std::max<std::size_t>(records.size(), 1));
    // Over quota: keep the newest records the quota still allows.
    if (records.size() > n) {
      records.erase(records.begin(), records.end() - static_cast<long>(n));
    }
    w = build_window(view, records, req.policy);
  }
  auth.complete(w.items.size());
  return to_json(w);
}

json Hub::recall(const Principal& p, const json& body) {
  EpisodeQuery q = episode_query_from_json(object_body(body));
  auto auth = access_->authorize(p, {"recall", digest_of(body)});
  q.k = auth.admit(q.k);
  const auto& scope = auth.decision().mandatory_predicate;
  json hits = json::array();
  {
    const auto view = store_->view();
    for (const auto& h : recall_episodes(view, q, scope)) {
      const SessionState* s = view.session(h.episode);
      json records = json::array();
      for (const auto& r : visible_records(view, *s, scope)) {
        records.push_back(to_json(r));
      }
      hits.push_back(json{{"episode", h.episode},
                          {"agent", s->agent.str()},
                          {"task_tags", s->task_tags},
                          {"score", h.score},
                          {"relevance", h.relevance},
                          {"recency", h.recency},
                          {"best_record_seq", h.best_record_seq},
                          {"records", std::move(records)}});
    }
  }
  auth.complete(hits.size());
  return json{{"episodes", std::move(hits)}};
}

json Hub::curate(const Principal& p, const json& body) {
  PlanningRequest req = planning_request_from_json(object_body(body));
  auto auth = access_->authorize(p, {"curate", digest_of(to_json(req))});
  req.k = auth.admit(req.k);
  json out;
  std::size_t n = 0;
  {
    const auto view = store_->view();
    const auto bundle =
        memhub::curate(view, req, auth.decision().mandatory_predicate);
    out = to_json(bundle);
    for (std::size_t i = 0; i < bundle.items.size(); ++i) {
      out["items"][i]["record"] = to_json(*view.find(bundle.items[i].seq));
    }
    n = bundle.items.size();
  }
  auth.complete(n);
  return out;
}

json Hub::add_policy(const Principal& p, const json& body) {
  const json& b = object_body(body);
  if (b.contains("pipeline")) {
    require_keys(b, {"pipeline"}, "policy request");
    PipelineSpec pl = pipeline_from_json(b["pipeline"]);
    access_->add_pipeline(p, pl);
    return json{{"pipeline", to_json(pl)}};
  }
  AccessRule rule = rule_from_json(b);
  access_->add_rule(p, rule);
  return to_json(rule);
}

json Hub::remove_policy(const Principal& p, const std::string& id) {
  access_->remove_rule(p, id);
  return json{{"removed", id}};
}

json Hub::list_policies(const Principal& p) {
  if (!p.admin) {
    access_->audit_event(p.agent.str(), "policy.list", "", "deny");
    throw Error(ErrorCode::kForbidden, "listing policies requires an admin");
  }
  access_->audit_event(p.agent.str(), "policy.list", "", "allow");
  json rules = json::array();
  for (const auto& r : access_->rules()) rules.push_back(to_json(r));
  json pipelines = json::array();
  for (const auto& pl : access_->pipelines()) pipelines.push_back(to_json(pl));
  return json{{"rules", std::move(rules)}, {"pipelines", std::move(pipelines)}};
}

json Hub::audit(const Principal& p, const QueryParams& params) {
  AuditFilter filter;
  filter.agent = param(params, "agent");
  filter.operation = param(params, "operation");
  filter.decision = param(params, "decision");
  if (auto tail = param(params, "tail")) {
    filter.tail = static_cast<std::size_t>(parse_id(*tail, "tail"));
  }
  json entries = json::array();
  for (const auto& e : access_->read_audit(p, filter)) {
    entries.push_back(to_json(e));
  }
  return json{{"entries", std::move(entries)}};
}

json Hub::issue_token(const Principal& p, const json& body) {
  const json& b = object_body(body);
  require_keys(b, {"agent", "roles", "admin", "task_tags"}, "token request");
  const AgentId agent(get_field<std::string>(b, "agent"));
  TagSet roles = get_optional<TagSet>(b, "roles").value_or(TagSet{});
  TagSet tags = get_optional<TagSet>(b, "task_tags").value_or(TagSet{});
  const bool admin = get_optional<bool>(b, "admin").value_or(false);
  validate_tags(roles);
  validate_tags(tags);
  const bool ok = p.admin;
  // The digest covers the grant, never the token.
  access_->audit_event(p.agent.str(), "token.issue", digest_of(b),
                       ok ? "allow" : "deny");
  if (!ok) throw Error(ErrorCode::kForbidden, "issuing tokens requires an admin");
  const IssuedToken t =
      tokens_->issue(agent, std::move(roles), admin, std::move(tags));
  json out = to_json(t.info);
  out["token"] = t.token;
  return out;
}

json Hub::revoke_token(const Principal& p, const std::string& id) {
  access_->audit_event(p.agent.str(), "token.revoke", digest_of(json(id)),
                       p.admin ? "allow" : "deny");
  if (!p.admin) {
    throw Error(ErrorCode::kForbidden, "revoking tokens requires an admin");
  }
  tokens_->revoke(id);
  return json{{"revoked", id}};
}

}  // namespace memhub
