#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "memhub/types.hpp"

namespace memhub {

template <typename T>
struct Range {
  T lo;
  T hi;

  bool contains(T value) const { return lo <= value && value <= hi; }
  bool overlaps(T other_lo, T other_hi) const {
    return other_lo <= hi && lo <= other_hi;
  }
  friend bool operator==(const Range&, const Range&) = default;
};

// Conjunction of optional clauses over record attributes. An empty predicate
// matches everything. `any_of` holds when at least one nested predicate
// holds; present-but-empty matches nothing. `all_of` nests conjunctions.
//
// String-valued clauses may carry access-rule placeholders (${self},
// ${task_tags}, ${predecessor}, ${workflow}); those are resolved before a
// predicate reaches the retrieval layer.
struct StructuredPredicate {
  std::optional<std::set<std::string>> agents;
  std::optional<std::set<SessionId>> sessions;
  std::optional<Range<Seq>> seq;
  std::optional<Range<TimestampMs>> ts;
  std::optional<std::set<AuthorKind>> author_kinds;
  std::optional<std::string> has_tag;
  std::optional<std::set<std::string>> has_all_tags;
  std::optional<std::set<std::string>> has_any_tags;
  std::optional<std::vector<StructuredPredicate>> any_of;
  std::vector<StructuredPredicate> all_of;

  bool empty() const;
  friend bool operator==(const StructuredPredicate&,
                         const StructuredPredicate&) = default;

  static StructuredPredicate match_all() { return {}; }
  static StructuredPredicate match_nothing();
};

// Throws invalid_request when any range (at any nesting depth) has lo > hi.
void validate(const StructuredPredicate& pred);

bool matches(const StructuredPredicate& pred, const MemoryRecord& record);

// Episode-level reading of the same clauses: agents tests the session opener,
// tag clauses test the episode tags, seq/ts ranges must overlap the episode
// span, author_kinds holds if any record has a listed kind.
bool matches(const StructuredPredicate& pred, const Episode& episode);

// a AND b, flattening trivially empty sides.
StructuredPredicate conjoin(const StructuredPredicate& a,
                            const StructuredPredicate& b);

}  // namespace memhub
