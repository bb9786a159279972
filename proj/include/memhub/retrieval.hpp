#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "memhub/codec.hpp"
#include "memhub/predicate.hpp"
#include "memhub/store.hpp"

namespace memhub {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

// Raw text (run through the store embedder) or an explicit D-vector.
struct VectorQuery {
  std::variant<std::string, std::vector<float>> value;

  std::vector<float> resolve(const StoreView& view) const;
};

struct HybridQuery {
  StructuredPredicate predicate;
  std::optional<std::string> text;
  std::optional<VectorQuery> vector;
  std::size_t k = 10;
  double alpha = 0.5;
};

struct ScoreBreakdown {
  std::optional<double> bm25;
  std::optional<double> cosine;
  std::optional<double> fused;
};

struct ScoredRecord {
  Seq seq;
  double score;
  ScoreBreakdown breakdown;
};

// Ordered by score descending, then seq descending.
using RankedResult = std::vector<ScoredRecord>;

// Records satisfying `pred`, seq ascending.
std::vector<Seq> structured_seqs(const StoreView& view,
                                 const StructuredPredicate& pred);
std::vector<MemoryRecord> structured_search(
    const StoreView& view, const StructuredPredicate& pred,
    std::optional<std::size_t> limit = std::nullopt);

// Sorted, de-duplicated query terms; throws invalid_request when the text
// has no terms.
std::vector<std::string> query_terms(std::string_view text);

// Okapi BM25 for each candidate, with N, df and average document length all
// taken over `candidates`. Result is aligned with `candidates`.
std::vector<double> bm25_scores(const StoreView& view,
                                std::span<const Seq> candidates,
                                const std::vector<std::string>& terms,
                                const Bm25Params& params = {});

// Cosine of each candidate's embedding against `query`; records without an
// embedding score 0.
std::vector<double> cosine_scores(const StoreView& view,
                                  std::span<const Seq> candidates,
                                  std::span<const float> query);

// Min-max normalization; an all-equal signal normalizes to 0.
std::vector<double> min_max_normalize(std::span<const double> values);

// Record-level relevance shared by hybrid search, episode recall and the
// curator. Text alone keeps only BM25 > 0; vector alone keeps every
// candidate; both fuse alpha * norm(bm25) + (1 - alpha) * norm(cosine) over
// every candidate. Unsorted, candidate order preserved.
std::vector<ScoredRecord> score_candidates(
    const StoreView& view, std::span<const Seq> candidates,
    const std::optional<std::string>& text,
    const std::optional<VectorQuery>& vector, double alpha);

// 2^(-(seq_max - seq) / half_life), in (0, 1]. Requires seq <= seq_max.
double recency(Seq seq, Seq seq_max, std::uint64_t half_life);

// Sorts by (score desc, seq desc) and keeps the first k.
RankedResult top_k(std::vector<ScoredRecord> scored, std::size_t k);

RankedResult fulltext_search(const StoreView& view, std::string_view text,
                             std::size_t k,
                             const StructuredPredicate& scope = {});
RankedResult semantic_search(const StoreView& view, const VectorQuery& query,
                             std::size_t k,
                             const StructuredPredicate& scope = {});
RankedResult hybrid_search(const StoreView& view, const HybridQuery& query);

inline RankedResult hybrid_search(const Store& store, const HybridQuery& q) {
  return hybrid_search(store.view(), q);
}

json to_json(const RankedResult& result);
HybridQuery hybrid_query_from_json(const json& j);
json to_json(const HybridQuery& q);
std::optional<VectorQuery> vector_query_from_json(const json& j);

}  // namespace memhub
