#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "memhub/error.hpp"
#include "memhub/retrieval.hpp"

namespace memhub {

std::vector<float> VectorQuery::resolve(const StoreView& view) const {
  if (const auto* text = std::get_if<std::string>(&value)) {
    return view.embedder().embed(*text);
  }
  const auto& vec = std::get<std::vector<float>>(value);
  if (vec.size() != view.config().embedding_dim) {
    throw_invalid("query vector has dimension " + std::to_string(vec.size()) +
                  ", store expects " +
                  std::to_string(view.config().embedding_dim));
  }
  return vec;
}

std::vector<Seq> structured_seqs(const StoreView& view,
                                 const StructuredPredicate& pred) {
  validate(pred);
  std::vector<Seq> out;
  Seq lo = 1;
  Seq hi = view.last_seq();
  if (pred.seq) {
    lo = std::max(lo, pred.seq->lo);
    hi = std::min(hi, pred.seq->hi);
  }
  const bool trivial = pred.empty();
  for (Seq s = lo; s <= hi; ++s) {
    if (trivial || matches(pred, *view.find(s))) out.push_back(s);
  }
  return out;
}

std::vector<MemoryRecord> structured_search(
    const StoreView& view, const StructuredPredicate& pred,
    std::optional<std::size_t> limit) {
  std::vector<MemoryRecord> out;
  for (Seq s : structured_seqs(view, pred)) {
    if (limit && out.size() >= *limit) break;
    out.push_back(*view.find(s));
  }
  return out;
}

std::vector<std::string> query_terms(std::string_view text) {
  auto terms = tokenize(text);
  if (terms.empty()) throw_invalid("text query has no terms");
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  return terms;
}

std::vector<double> bm25_scores(const StoreView& view,
                                std::span<const Seq> candidates,
                                const std::vector<std::string>& terms,
                                const Bm25Params& params) {
  std::vector<double> scores(candidates.size(), 0.0);
  if (candidates.empty()) return scores;

  // slot[seq] = index into candidates, or -1.
  std::vector<std::int64_t> slot(view.last_seq() + 1, -1);
  double total_length = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    slot[candidates[i]] = static_cast<std::int64_t>(i);
    total_length += view.doc_length(candidates[i]);
  }
  const double n = static_cast<double>(candidates.size());
  const double avgdl = total_length / n;

  for (const auto& term : terms) {
    const auto* postings = view.postings(term);
    if (!postings) continue;
    std::vector<const Posting*> in_scope;
    for (const auto& p : *postings) {
      if (p.seq < slot.size() && slot[p.seq] >= 0) in_scope.push_back(&p);
    }
    if (in_scope.empty()) continue;
    const double df = static_cast<double>(in_scope.size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (const Posting* p : in_scope) {
      const double tf = p->tf;
      const double dl = view.doc_length(p->seq);
      const double norm =
          params.k1 * (1.0 - params.b + params.b * dl / avgdl);
      scores[slot[p->seq]] += idf * tf * (params.k1 + 1.0) / (tf + norm);
    }
  }
  return scores;
}

std::vector<double> cosine_scores(const StoreView& view,
                                  std::span<const Seq> candidates,
                                  std::span<const float> query) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (Seq s : candidates) {
    const auto& emb = view.find(s)->embedding;
    scores.push_back(emb ? cosine(*emb, query) : 0.0);
  }
  return scores;
}

std::vector<double> min_max_normalize(std::span<const double> values) {
  std::vector<double> out(values.size(), 0.0);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = (values[i] - *lo) / range;
  }
  return out;
}

std::vector<ScoredRecord> score_candidates(
    const StoreView& view, std::span<const Seq> candidates,
    const std::optional<std::string>& text,
    const std::optional<VectorQuery>& vector, double alpha) {
  std::vector<ScoredRecord> out;
  if (!text && !vector) {
    for (Seq s : candidates) out.push_back({s, 0.0, {}});
    return out;
  }
  std::vector<double> bm25;
  std::vector<double> cos;
  if (text) bm25 = bm25_scores(view, candidates, query_terms(*text));
  if (vector) {
    const auto q = vector->resolve(view);
    cos = cosine_scores(view, candidates, q);
  }
  if (text && !vector) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (bm25[i] > 0.0) {
        out.push_back({candidates[i], bm25[i], {bm25[i], {}, {}}});
      }
    }
  } else if (vector && !text) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      out.push_back({candidates[i], cos[i], {{}, cos[i], {}}});
    }
  } else {
    const auto nb = min_max_normalize(bm25);
    const auto nc = min_max_normalize(cos);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const double fused = alpha * nb[i] + (1.0 - alpha) * nc[i];
      out.push_back({candidates[i], fused, {bm25[i], cos[i], fused}});
    }
  }
  return out;
}

double recency(Seq seq, Seq seq_max, std::uint64_t half_life) {
  if (seq > seq_max) throw_invalid("recency requires seq <= seq_max");
  if (half_life == 0) throw_invalid("half-life must be at least 1");
  return std::exp2(-static_cast<double>(seq_max - seq) /
                   static_cast<double>(half_life));
}

RankedResult top_k(std::vector<ScoredRecord> scored, std::size_t k) {
  auto better = [](const ScoredRecord& a, const ScoredRecord& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.seq > b.seq;
  };
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(),
                    better);
  scored.resize(keep);
  return scored;
}

namespace {

void check_k(std::size_t k) {
  if (k == 0) throw_invalid("k must be at least 1");
}

}  // namespace

RankedResult fulltext_search(const StoreView& view, std::string_view text,
                             std::size_t k, const StructuredPredicate& scope) {
  check_k(k);
  const auto terms = query_terms(text);
  const auto candidates = structured_seqs(view, scope);
  const auto bm25 = bm25_scores(view, candidates, terms);
  std::vector<ScoredRecord> scored;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (bm25[i] > 0.0) {
      scored.push_back({candidates[i], bm25[i], {bm25[i], {}, {}}});
    }
  }
  return top_k(std::move(scored), k);
}

RankedResult semantic_search(const StoreView& view, const VectorQuery& query,
                             std::size_t k, const StructuredPredicate& scope) {
  check_k(k);
  const auto q = query.resolve(view);
  const auto candidates = structured_seqs(view, scope);
  const auto cos = cosine_scores(view, candidates, q);
  std::vector<ScoredRecord> scored;
  scored.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scored.push_back({candidates[i], cos[i], {{}, cos[i], {}}});
  }
  return top_k(std::move(scored), k);
}

RankedResult hybrid_search(const StoreView& view, const HybridQuery& q) {
  check_k(q.k);
  if (!(q.alpha >= 0.0 && q.alpha <= 1.0)) {
    throw_invalid("alpha must lie in [0, 1]");
  }
  const auto candidates = structured_seqs(view, q.predicate);
  return top_k(score_candidates(view, candidates, q.text, q.vector, q.alpha),
               q.k);
}

// --- JSON --------------------------------------------------------------------

namespace {

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json to_json(const RankedResult& result) {
  json arr = json::array();
  for (const auto& r : result) {
    arr.push_back(json{{"seq", r.seq},
                       {"score", r.score},
                       {"bm25", optional_number(r.breakdown.bm25)},
                       {"cosine", optional_number(r.breakdown.cosine)},
                       {"fused", optional_number(r.breakdown.fused)}});
  }
  return json{{"results", std::move(arr)}};
}

std::optional<VectorQuery> vector_query_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  if (j.is_string()) return VectorQuery{j.get<std::string>()};
  if (j.is_array()) {
    std::vector<float> v;
    v.reserve(j.size());
    for (const auto& x : j) {
      if (!x.is_number()) throw_invalid("vector must contain numbers");
      v.push_back(x.get<float>());
    }
    return VectorQuery{std::move(v)};
  }
  throw_invalid("vector must be an array of numbers or a text string");
}

HybridQuery hybrid_query_from_json(const json& j) {
  require_keys(j, {"predicate", "text", "vector", "k", "alpha"}, "query");
  HybridQuery q;
  if (j.contains("predicate")) q.predicate = predicate_from_json(j["predicate"]);
  q.text = get_optional<std::string>(j, "text");
  if (q.text) query_terms(*q.text);
  if (j.contains("vector")) q.vector = vector_query_from_json(j["vector"]);
  const auto k = get_optional<std::int64_t>(j, "k").value_or(10);
  if (k < 1) throw_invalid("k must be at least 1");
  q.k = static_cast<std::size_t>(k);
  q.alpha = get_optional<double>(j, "alpha").value_or(0.5);
  if (!(q.alpha >= 0.0 && q.alpha <= 1.0)) {
    throw_invalid("alpha must lie in [0, 1]");
  }
  return q;
}

json to_json(const HybridQuery& q) {
  json j{{"predicate", to_json(q.predicate)}, {"k", q.k}, {"alpha", q.alpha}};
  if (q.text) j["text"] = *q.text;
  if (q.vector) {
    std::visit([&](const auto& v) { j["vector"] = v; }, q.vector->value);
  }
  return j;
}

}  // namespace memhub
