#pragma once

#include <optional>
#include <string>
#include <vector>

#include "memhub/codec.hpp"
#include "memhub/retrieval.hpp"
#include "memhub/store.hpp"
#include "memhub/text.hpp"

namespace memhub {

struct EpisodeQuery {
  std::optional<std::string> text;
  std::optional<VectorQuery> vector;
  std::size_t k = 5;
  // Evaluated against episode attributes (opener, tags, time span).
  std::optional<StructuredPredicate> filter;
  double alpha = 0.5;
};

struct RecallWeights {
  double relevance = 0.8;
  double recency = 0.2;
};

struct RecallHit {
  EpisodeId episode;
  double score;
  double relevance;
  double recency;
  Seq best_record_seq;
};

// Score descending, ties to the higher episode id.
using EpisodeRecall = std::vector<RecallHit>;

// Scores each closed episode passing the filter by the best record-level
// hybrid score among its records (same fusion as hybrid_search, computed over
// the pooled records of all eligible episodes), blended with recency of its
// last record. `record_scope` restricts which records are visible; episodes
// with no visible scored record are skipped.
EpisodeRecall recall_episodes(const StoreView& view, const EpisodeQuery& q,
                              const StructuredPredicate& record_scope = {},
                              const RecallWeights& weights = {});

inline EpisodeRecall recall_episodes(const Store& store,
                                     const EpisodeQuery& q) {
  return recall_episodes(store.view(), q);
}

struct RenderedEpisode {
  std::string text;
  std::size_t header_tokens = 0;
  std::size_t body_tokens = 0;
  bool truncated = false;
};

// "episode <id> agent <agent> tags <t1,t2>" followed by the extractive
// summary of the episode's records under `budget` (header excluded).
RenderedEpisode render_episode(const Store& store, EpisodeId id,
                               std::size_t budget,
                               const TokenCounter& counter =
                                   default_token_counter());

json to_json(const EpisodeRecall& recall);
EpisodeQuery episode_query_from_json(const json& j);

}  // namespace memhub
