#include <algorithm>
#include <map>

#include "memhub/episodic.hpp"
#include "memhub/error.hpp"
#include "memhub/window.hpp"

namespace memhub {

EpisodeRecall recall_episodes(const StoreView& view, const EpisodeQuery& q,
                              const StructuredPredicate& record_scope,
                              const RecallWeights& weights) {
  if (q.k == 0) throw_invalid("k must be at least 1");
  if (!q.text && !q.vector) {
    throw_invalid("recall needs a text or vector context");
  }
  if (q.filter) validate(*q.filter);
  validate(record_scope);

  struct Eligible {
    EpisodeId id;
    Seq last_seq;
  };
  std::vector<Eligible> eligible;
  std::vector<Seq> candidates;
  std::map<Seq, EpisodeId> owner;
  for (const auto& [id, s] : view.sessions()) {
    if (s.open() || s.records.empty()) continue;
    if (q.filter && !q.filter->empty() && !matches(*q.filter, view.episode(s))) {
      continue;
    }
    eligible.push_back({id, s.records.back()});
    for (Seq seq : s.records) {
      if (record_scope.empty() || matches(record_scope, *view.find(seq))) {
        candidates.push_back(seq);
        owner.emplace(seq, id);
      }
    }
  }
  std::sort(candidates.begin(), candidates.end());

  const auto scored =
      score_candidates(view, candidates, q.text, q.vector, q.alpha);

  struct Best {
    double relevance;
    Seq seq;
  };
  std::map<EpisodeId, Best> best;
  for (const auto& r : scored) {
    const EpisodeId e = owner.at(r.seq);
    auto it = best.find(e);
    if (it == best.end()) {
      best.emplace(e, Best{r.score, r.seq});
    } else if (r.score > it->second.relevance ||
               (r.score == it->second.relevance && r.seq > it->second.seq)) {
      it->second = Best{r.score, r.seq};
    }
  }

  const Seq seq_max = view.last_seq();
  const auto half_life = view.config().recency_half_life;
  EpisodeRecall hits;
  for (const auto& e : eligible) {
    auto it = best.find(e.id);
    if (it == best.end()) continue;
    const double rec = recency(e.last_seq, seq_max, half_life);
    hits.push_back(RecallHit{
        e.id, weights.relevance * it->second.relevance + weights.recency * rec,
        it->second.relevance, rec, it->second.seq});
  }
  std::sort(hits.begin(), hits.end(), [](const RecallHit& a, const RecallHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.episode > b.episode;
  });
  if (hits.size() > q.k) hits.resize(q.k);
  return hits;
}

RenderedEpisode render_episode(const Store& store, EpisodeId id,
                               std::size_t budget,
                               const TokenCounter& counter) {
  if (budget == 0) throw_invalid("budget must be at least 1");
  const Episode e = store.get_episode(id);
  if (e.open) {
    throw_invalid("episode " + std::to_string(id) + " is still open");
  }
  std::string tags;
  for (const auto& t : e.task_tags) {
    if (!tags.empty()) tags += ',';
    tags += t;
  }
  RenderedEpisode out;
  out.text = "episode " + std::to_string(e.id) + " agent " + e.agent.str() +
             " tags " + tags;
  out.header_tokens = counter.count(out.text);
  const WindowView body = summarize_extractive(e.records, budget, counter);
  for (const auto& item : body.items) {
    out.text += '\n';
    out.text += item.text;
  }
  out.body_tokens = body.token_count;
  out.truncated = body.truncated;
  return out;
}

json to_json(const EpisodeRecall& recall) {
  json arr = json::array();
  for (const auto& h : recall) {
    arr.push_back(json{{"episode", h.episode},
                       {"score", h.score},
                       {"relevance", h.relevance},
                       {"recency", h.recency},
                       {"best_record_seq", h.best_record_seq}});
  }
  return json{{"episodes", std::move(arr)}};
}

EpisodeQuery episode_query_from_json(const json& j) {
  require_keys(j, {"context", "k", "filter", "alpha"}, "recall request");
  const json context = get_field<json>(j, "context");
  require_keys(context, {"text", "vector"}, "context");
  EpisodeQuery q;
  q.text = get_optional<std::string>(context, "text");
  if (q.text) query_terms(*q.text);
  if (context.contains("vector")) {
    q.vector = vector_query_from_json(context["vector"]);
  }
  if (!q.text && !q.vector) {
    throw_invalid("recall context needs text or vector");
  }
  const auto k = get_optional<std::int64_t>(j, "k").value_or(5);
  if (k < 1) throw_invalid("k must be at least 1");
  q.k = static_cast<std::size_t>(k);
  if (j.contains("filter") && !j["filter"].is_null()) {
    q.filter = predicate_from_json(j["filter"]);
  }
  q.alpha = get_optional<double>(j, "alpha").value_or(0.5);
  if (!(q.alpha >= 0.0 && q.alpha <= 1.0)) {
    throw_invalid("alpha must lie in [0, 1]");
  }
  return q;
}

}  // namespace memhub
