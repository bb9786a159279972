#pragma once

#include <optional>
#include <string>
#include <vector>

#include "memhub/access.hpp"
#include "memhub/codec.hpp"
#include "memhub/retrieval.hpp"
#include "memhub/store.hpp"

namespace memhub {

enum class Horizon { kShortTerm, kLongTerm };

std::string_view horizon_name(Horizon h);
Horizon horizon_from_name(std::string_view name);

struct CuratorWeights {
  double relevance;
  double recency;
};

// (0.3, 0.7) short term, (0.8, 0.2) long term.
CuratorWeights default_weights(Horizon h);

inline constexpr std::size_t kCuratorStrata = 4;

struct PlanningRequest {
  std::optional<std::string> text;
  std::optional<VectorQuery> vector;
  Horizon horizon = Horizon::kShortTerm;
  std::size_t k = 8;
  // Narrows the candidates on top of the caller's access scope.
  StructuredPredicate filter;
};

struct CuratedItem {
  Seq seq;
  double combined;
  double relevance;       // raw hybrid relevance
  double relevance_norm;  // min-max over the candidate set
  double recency;
};

struct CuratedBundle {
  std::vector<CuratedItem> items;  // combined descending, ties newer first
  Horizon horizon;
  std::string scope_digest;
};

// Ranks the records visible under `scope` for a planning request. Long-term
// requests reserve min(k / 4, population) slots in each of four equal-width
// seq strata over the candidates before filling by combined score.
CuratedBundle curate(const StoreView& view, const PlanningRequest& req,
                     const StructuredPredicate& scope);

// Authorizes `principal`, applies its mandatory predicate and quota, and
// audits the request.
CuratedBundle curate(const Store& store, AccessEngine& access,
                     const Principal& principal, const PlanningRequest& req);

// Stratum index in [0, 4) of `seq` for candidates spanning [lo, hi].
std::size_t stratum_of(Seq seq, Seq lo, Seq hi);

json to_json(const CuratedBundle& bundle);
PlanningRequest planning_request_from_json(const json& j);
json to_json(const PlanningRequest& req);

}  // namespace memhub
