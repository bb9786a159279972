#pragma once

#include <json.hpp>

#include "memhub/error.hpp"
#include "memhub/predicate.hpp"
#include "memhub/types.hpp"

namespace memhub {

using json = nlohmann::json;

// Log-line shape of a record: seq, session, agent, author_kind, content,
// embedding (array or null), task_tags, ts, metadata.
json to_json(const MemoryRecord& record);
MemoryRecord record_from_json(const json& j);

json to_json(const Episode& episode);
json to_json(const EpisodeSummary& summary);

json to_json(const StructuredPredicate& pred);
// Strict: unknown keys and ill-typed values are invalid_request. Placeholder
// strings are accepted in string clauses.
StructuredPredicate predicate_from_json(const json& j);

// Typed field access that reports failures as invalid_request naming the
// field.
template <typename T>
T get_field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end()) {
    throw Error(ErrorCode::kInvalidRequest,
                std::string("missing field '") + name + "'");
  }
  try {
    return it->template get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidRequest,
                std::string("field '") + name + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> get_optional(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  try {
    return it->template get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidRequest,
                std::string("field '") + name + "' has the wrong type");
  }
}

// Rejects keys outside `allowed`.
void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                  const char* what);

json parse_json(std::string_view text);

}  // namespace memhub
