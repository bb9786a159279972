#include <algorithm>
#include <cstring>

#include "memhub/codec.hpp"
#include "memhub/error.hpp"

namespace memhub {

void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                  const char* what) {
  if (!obj.is_object()) {
    throw_invalid(std::string(what) + " must be a JSON object");
  }
  for (const auto& item : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](auto k) {
      return item.key() == k;
    });
    if (!known) {
      throw_invalid(std::string("unknown field '") + item.key() + "' in " +
                    what);
    }
  }
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw_invalid(std::string("malformed JSON: ") + e.what());
  }
}

json to_json(const MemoryRecord& r) {
  json j;
  j["seq"] = r.seq;
  j["session"] = r.session;
  j["agent"] = r.agent.str();
  j["author_kind"] = author_kind_name(r.author_kind);
  j["content"] = r.content;
  if (r.embedding) {
    j["embedding"] = *r.embedding;
  } else {
    j["embedding"] = nullptr;
  }
  j["task_tags"] = r.task_tags;
  j["ts"] = r.ts;
  j["metadata"] = r.metadata;
  return j;
}

MemoryRecord record_from_json(const json& j) {
  require_keys(j,
               {"seq", "session", "agent", "author_kind", "content",
                "embedding", "task_tags", "ts", "metadata"},
               "record");
  std::optional<std::vector<float>> embedding;
  if (j.contains("embedding") && !j["embedding"].is_null()) {
    embedding = get_field<std::vector<float>>(j, "embedding");
  }
  return MemoryRecord{
      get_field<Seq>(j, "seq"),
      get_field<SessionId>(j, "session"),
      AgentId(get_field<std::string>(j, "agent")),
      author_kind_from_name(get_field<std::string>(j, "author_kind")),
      get_field<std::string>(j, "content"),
      std::move(embedding),
      get_field<TagSet>(j, "task_tags"),
      get_field<TimestampMs>(j, "ts"),
      get_field<Metadata>(j, "metadata"),
  };
}

namespace {

json optional_ts(const std::optional<TimestampMs>& ts) {
  return ts ? json(*ts) : json(nullptr);
}

}  // namespace

json to_json(const Episode& e) {
  json records = json::array();
  for (const auto& r : e.records) records.push_back(to_json(r));
  return json{{"id", e.id},
              {"agent", e.agent.str()},
              {"task_tags", e.task_tags},
              {"opened_ts", e.opened_ts},
              {"closed_ts", optional_ts(e.closed_ts)},
              {"open", e.open},
              {"records", std::move(records)}};
}

json to_json(const EpisodeSummary& s) {
  return json{{"id", s.id},
              {"agent", s.agent.str()},
              {"task_tags", s.task_tags},
              {"opened_ts", s.opened_ts},
              {"closed_ts", optional_ts(s.closed_ts)},
              {"open", s.open},
              {"record_count", s.record_count},
              {"first_seq", s.first_seq ? json(*s.first_seq) : json(nullptr)},
              {"last_seq", s.last_seq ? json(*s.last_seq) : json(nullptr)}};
}

namespace {

template <typename T>
json range_to_json(const Range<T>& r) {
  return json{{"lo", r.lo}, {"hi", r.hi}};
}

template <typename T>
Range<T> range_from_json(const json& j, const char* name) {
  if (!j.is_object()) {
    throw_invalid(std::string("'") + name + "' must be {\"lo\", \"hi\"}");
  }
  require_keys(j, {"lo", "hi"}, name);
  return Range<T>{get_field<T>(j, "lo"), get_field<T>(j, "hi")};
}

std::set<std::string> string_set(const json& j, const char* name) {
  if (j.is_string()) return {j.get<std::string>()};
  if (!j.is_array()) {
    throw_invalid(std::string("'") + name + "' must be a string array");
  }
  std::set<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) {
      throw_invalid(std::string("'") + name + "' must be a string array");
    }
    out.insert(v.get<std::string>());
  }
  return out;
}

}  // namespace

json to_json(const StructuredPredicate& p) {
  json j = json::object();
  if (p.agents) j["agents"] = *p.agents;
  if (p.sessions) j["sessions"] = *p.sessions;
  if (p.seq) j["seq"] = range_to_json(*p.seq);
  if (p.ts) j["ts"] = range_to_json(*p.ts);
  if (p.author_kinds) {
    json kinds = json::array();
    for (auto k : *p.author_kinds) kinds.push_back(author_kind_name(k));
    j["author_kinds"] = std::move(kinds);
  }
  if (p.has_tag) j["has_tag"] = *p.has_tag;
  if (p.has_all_tags) j["has_all_tags"] = *p.has_all_tags;
  if (p.has_any_tags) j["has_any_tags"] = *p.has_any_tags;
  if (p.any_of) {
    json arr = json::array();
    for (const auto& sub : *p.any_of) arr.push_back(to_json(sub));
    j["any_of"] = std::move(arr);
  }
  if (!p.all_of.empty()) {
    json arr = json::array();
    for (const auto& sub : p.all_of) arr.push_back(to_json(sub));
    j["all_of"] = std::move(arr);
  }
  return j;
}

StructuredPredicate predicate_from_json(const json& j) {
  if (j.is_null()) return {};
  require_keys(j,
               {"agent", "agents", "session", "sessions", "seq", "ts",
                "author_kind", "author_kinds", "has_tag", "has_all_tags",
                "has_any_tags", "any_of", "all_of"},
               "predicate");
  StructuredPredicate p;
  for (const char* key : {"agent", "agents"}) {
    if (j.contains(key)) {
      auto values = string_set(j[key], key);
      if (p.agents) {
        p.agents->insert(values.begin(), values.end());
      } else {
        p.agents = std::move(values);
      }
    }
  }
  for (const char* key : {"session", "sessions"}) {
    if (!j.contains(key)) continue;
    const auto& v = j[key];
    if (!p.sessions) p.sessions.emplace();
    auto is_id = [](const json& x) {
      return x.is_number_integer() && x.get<std::int64_t>() >= 0;
    };
    if (is_id(v)) {
      p.sessions->insert(v.get<SessionId>());
    } else if (v.is_array()) {
      for (const auto& s : v) {
        if (!is_id(s)) throw_invalid("sessions must be ids");
        p.sessions->insert(s.get<SessionId>());
      }
    } else {
      throw_invalid("sessions must be ids");
    }
  }
  if (j.contains("seq")) p.seq = range_from_json<Seq>(j["seq"], "seq");
  if (j.contains("ts")) p.ts = range_from_json<TimestampMs>(j["ts"], "ts");
  for (const char* key : {"author_kind", "author_kinds"}) {
    if (!j.contains(key)) continue;
    if (!p.author_kinds) p.author_kinds.emplace();
    for (const auto& name : string_set(j[key], key)) {
      p.author_kinds->insert(author_kind_from_name(name));
    }
  }
  if (j.contains("has_tag")) {
    if (!j["has_tag"].is_string()) throw_invalid("has_tag must be a string");
    p.has_tag = j["has_tag"].get<std::string>();
  }
  if (j.contains("has_all_tags")) {
    p.has_all_tags = string_set(j["has_all_tags"], "has_all_tags");
  }
  if (j.contains("has_any_tags")) {
    p.has_any_tags = string_set(j["has_any_tags"], "has_any_tags");
  }
  if (j.contains("any_of")) {
    if (!j["any_of"].is_array()) throw_invalid("any_of must be an array");
    p.any_of.emplace();
    for (const auto& sub : j["any_of"]) {
      p.any_of->push_back(predicate_from_json(sub));
    }
  }
  if (j.contains("all_of")) {
    if (!j["all_of"].is_array()) throw_invalid("all_of must be an array");
    for (const auto& sub : j["all_of"]) {
      p.all_of.push_back(predicate_from_json(sub));
    }
  }
  validate(p);
  return p;
}

}  // namespace memhub
