#include <algorithm>
#include <chrono>

#include "memhub/error.hpp"
#include "memhub/predicate.hpp"
#include "memhub/types.hpp"

namespace memhub {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnauthenticated: return "unauthenticated";
    case ErrorCode::kForbidden: return "forbidden";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kInvalidRequest: return "invalid_request";
    case ErrorCode::kQuotaExceeded: return "quota_exceeded";
    case ErrorCode::kInternal: return "internal";
  }
  return "internal";
}

ErrorCode error_code_from_name(std::string_view name) {
  for (auto code : {ErrorCode::kUnauthenticated, ErrorCode::kForbidden,
                    ErrorCode::kNotFound, ErrorCode::kInvalidRequest,
                    ErrorCode::kQuotaExceeded, ErrorCode::kInternal}) {
    if (error_code_name(code) == name) return code;
  }
  return ErrorCode::kInternal;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnauthenticated: return 401;
    case ErrorCode::kForbidden: return 403;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kInvalidRequest: return 400;
    case ErrorCode::kQuotaExceeded: return 429;
    case ErrorCode::kInternal: return 500;
  }
  return 500;
}

bool is_valid_identifier(std::string_view value) {
  if (value.empty() || value.size() > kMaxIdentifierBytes) return false;
  return std::all_of(value.begin(), value.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '_' || c == '.' || c == '-';
  });
}

void validate_tag(std::string_view tag) {
  if (!is_valid_identifier(tag)) {
    throw_invalid("invalid tag '" + std::string(tag) + "'");
  }
}

void validate_tags(const TagSet& tags) {
  if (tags.size() > kMaxTags) {
    throw_invalid("too many tags (max " + std::to_string(kMaxTags) + ")");
  }
  for (const auto& tag : tags) validate_tag(tag);
}

AgentId::AgentId(std::string value) : value_(std::move(value)) {
  if (!is_valid_identifier(value_)) {
    throw_invalid("invalid agent id '" + value_ + "'");
  }
}

std::string_view author_kind_name(AuthorKind kind) {
  switch (kind) {
    case AuthorKind::kUser: return "user";
    case AuthorKind::kAgent: return "agent";
    case AuthorKind::kSystem: return "system";
    case AuthorKind::kTool: return "tool";
  }
  return "agent";
}

AuthorKind author_kind_from_name(std::string_view name) {
  if (name == "user") return AuthorKind::kUser;
  if (name == "agent") return AuthorKind::kAgent;
  if (name == "system") return AuthorKind::kSystem;
  if (name == "tool") return AuthorKind::kTool;
  throw_invalid("unknown author_kind '" + std::string(name) + "'");
}

Clock system_clock() {
  return [] {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch())
        .count();
  };
}

// --- StructuredPredicate ---------------------------------------------------

bool StructuredPredicate::empty() const {
  return !agents && !sessions && !seq && !ts && !author_kinds && !has_tag &&
         !has_all_tags && !has_any_tags && !any_of &&
         std::all_of(all_of.begin(), all_of.end(),
                     [](const auto& p) { return p.empty(); });
}

StructuredPredicate StructuredPredicate::match_nothing() {
  StructuredPredicate p;
  p.any_of.emplace();
  return p;
}

void validate(const StructuredPredicate& pred) {
  if (pred.seq && pred.seq->lo > pred.seq->hi) {
    throw_invalid("seq range has lo > hi");
  }
  if (pred.ts && pred.ts->lo > pred.ts->hi) {
    throw_invalid("ts range has lo > hi");
  }
  if (pred.any_of) {
    for (const auto& p : *pred.any_of) validate(p);
  }
  for (const auto& p : pred.all_of) validate(p);
}

namespace {

bool has_all(const TagSet& have, const std::set<std::string>& want) {
  return std::includes(have.begin(), have.end(), want.begin(), want.end());
}

bool has_any(const TagSet& have, const std::set<std::string>& want) {
  return std::any_of(want.begin(), want.end(),
                     [&](const auto& t) { return have.count(t) > 0; });
}

}  // namespace

bool matches(const StructuredPredicate& pred, const MemoryRecord& r) {
  if (pred.agents && !pred.agents->count(r.agent.str())) return false;
  if (pred.sessions && !pred.sessions->count(r.session)) return false;
  if (pred.seq && !pred.seq->contains(r.seq)) return false;
  if (pred.ts && !pred.ts->contains(r.ts)) return false;
  if (pred.author_kinds && !pred.author_kinds->count(r.author_kind)) {
    return false;
  }
  if (pred.has_tag && !r.task_tags.count(*pred.has_tag)) return false;
  if (pred.has_all_tags && !has_all(r.task_tags, *pred.has_all_tags)) {
    return false;
  }
  if (pred.has_any_tags && !has_any(r.task_tags, *pred.has_any_tags)) {
    return false;
  }
  if (pred.any_of &&
      std::none_of(pred.any_of->begin(), pred.any_of->end(),
                   [&](const auto& p) { return matches(p, r); })) {
    return false;
  }
  return std::all_of(pred.all_of.begin(), pred.all_of.end(),
                     [&](const auto& p) { return matches(p, r); });
}

bool matches(const StructuredPredicate& pred, const Episode& e) {
  if (pred.agents && !pred.agents->count(e.agent.str())) return false;
  if (pred.sessions && !pred.sessions->count(e.id)) return false;
  if (pred.seq) {
    if (e.records.empty()) return false;
    if (!pred.seq->overlaps(e.records.front().seq, e.records.back().seq)) {
      return false;
    }
  }
  if (pred.ts) {
    TimestampMs end = e.closed_ts.value_or(
        e.records.empty() ? e.opened_ts : e.records.back().ts);
    if (!pred.ts->overlaps(e.opened_ts, end)) return false;
  }
  if (pred.author_kinds &&
      std::none_of(e.records.begin(), e.records.end(), [&](const auto& r) {
        return pred.author_kinds->count(r.author_kind) > 0;
      })) {
    return false;
  }
  if (pred.has_tag && !e.task_tags.count(*pred.has_tag)) return false;
  if (pred.has_all_tags && !has_all(e.task_tags, *pred.has_all_tags)) {
    return false;
  }
  if (pred.has_any_tags && !has_any(e.task_tags, *pred.has_any_tags)) {
    return false;
  }
  if (pred.any_of &&
      std::none_of(pred.any_of->begin(), pred.any_of->end(),
                   [&](const auto& p) { return matches(p, e); })) {
    return false;
  }
  return std::all_of(pred.all_of.begin(), pred.all_of.end(),
                     [&](const auto& p) { return matches(p, e); });
}

StructuredPredicate conjoin(const StructuredPredicate& a,
                            const StructuredPredicate& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  StructuredPredicate out;
  out.all_of = {a, b};
  return out;
}

}  // namespace memhub
