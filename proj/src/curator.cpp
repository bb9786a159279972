#include <algorithm>
#include <array>
#include <cmath>

#include "memhub/curator.hpp"
#include "memhub/error.hpp"

namespace memhub {

std::string_view horizon_name(Horizon h) {
  return h == Horizon::kShortTerm ? "short_term" : "long_term";
}

Horizon horizon_from_name(std::string_view name) {
  if (name == "short_term") return Horizon::kShortTerm;
  if (name == "long_term") return Horizon::kLongTerm;
  throw_invalid("horizon must be short_term or long_term");
}

CuratorWeights default_weights(Horizon h) {
  return h == Horizon::kShortTerm ? CuratorWeights{0.3, 0.7}
                                  : CuratorWeights{0.8, 0.2};
}

std::size_t stratum_of(Seq seq, Seq lo, Seq hi) {
  const double width =
      static_cast<double>(hi - lo + 1) / static_cast<double>(kCuratorStrata);
  const auto idx =
      static_cast<std::size_t>(std::floor(static_cast<double>(seq - lo) / width));
  return std::min(idx, kCuratorStrata - 1);
}

namespace {

bool ranks_before(const CuratedItem& a, const CuratedItem& b) {
  if (a.combined != b.combined) return a.combined > b.combined;
  return a.seq > b.seq;
}

}  // namespace

CuratedBundle curate(const StoreView& view, const PlanningRequest& req,
                     const StructuredPredicate& scope) {
  if (req.k == 0) throw_invalid("k must be at least 1");
  if (!req.text && !req.vector) {
    throw_invalid("a planning request needs a text or vector query");
  }
  CuratedBundle bundle{{}, req.horizon, digest_of(to_json(scope))};

  const auto candidates = structured_seqs(view, conjoin(scope, req.filter));
  const auto scored =
      score_candidates(view, candidates, req.text, req.vector, 0.5);
  if (scored.empty()) return bundle;

  std::vector<double> relevance;
  relevance.reserve(scored.size());
  for (const auto& s : scored) relevance.push_back(s.score);
  const auto norm = min_max_normalize(relevance);

  const auto w = default_weights(req.horizon);
  const Seq seq_max = view.last_seq();
  const auto half_life = view.config().recency_half_life;
  std::vector<CuratedItem> items;
  items.reserve(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    const double rec = recency(scored[i].seq, seq_max, half_life);
    items.push_back({scored[i].seq, w.relevance * norm[i] + w.recency * rec,
                     relevance[i], norm[i], rec});
  }
  std::sort(items.begin(), items.end(), ranks_before);

  if (req.horizon == Horizon::kShortTerm || items.size() <= req.k) {
    if (items.size() > req.k) items.resize(req.k);
    bundle.items = std::move(items);
    return bundle;
  }

  Seq lo = items.front().seq, hi = items.front().seq;
  for (const auto& it : items) {
    lo = std::min(lo, it.seq);
    hi = std::max(hi, it.seq);
  }
  const std::size_t per_stratum = req.k / kCuratorStrata;
  std::array<std::size_t, kCuratorStrata> taken{};
  std::vector<bool> chosen(items.size(), false);
  std::size_t selected = 0;
  // items is already in rank order, so the first hits per stratum are its
  // best members.
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto s = stratum_of(items[i].seq, lo, hi);
    if (taken[s] < per_stratum) {
      ++taken[s];
      chosen[i] = true;
      ++selected;
    }
  }
  for (std::size_t i = 0; i < items.size() && selected < req.k; ++i) {
    if (!chosen[i]) {
      chosen[i] = true;
      ++selected;
    }
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (chosen[i]) bundle.items.push_back(items[i]);
  }
  return bundle;
}

CuratedBundle curate(const Store& store, AccessEngine& access,
                     const Principal& principal, const PlanningRequest& req) {
  auto auth = access.authorize(principal, {"curate", digest_of(to_json(req))});
  PlanningRequest admitted = req;
  admitted.k = auth.admit(req.k);
  CuratedBundle bundle =
      curate(store.view(), admitted, auth.decision().mandatory_predicate);
  auth.complete(bundle.items.size());
  return bundle;
}

json to_json(const CuratedBundle& b) {
  json items = json::array();
  for (const auto& it : b.items) {
    items.push_back(json{{"seq", it.seq},
                         {"combined", it.combined},
                         {"relevance", it.relevance},
                         {"relevance_norm", it.relevance_norm},
                         {"recency", it.recency}});
  }
  return json{{"horizon", horizon_name(b.horizon)},
              {"scope_digest", b.scope_digest},
              {"items", std::move(items)}};
}

PlanningRequest planning_request_from_json(const json& j) {
  require_keys(j, {"query", "horizon", "k", "filter"}, "curate request");
  const json query = get_field<json>(j, "query");
  require_keys(query, {"text", "vector"}, "query");
  PlanningRequest req;
  req.text = get_optional<std::string>(query, "text");
  if (req.text) query_terms(*req.text);
  if (query.contains("vector")) {
    req.vector = vector_query_from_json(query["vector"]);
  }
  if (!req.text && !req.vector) {
    throw_invalid("curate query needs text or vector");
  }
  req.horizon = horizon_from_name(
      get_optional<std::string>(j, "horizon").value_or("short_term"));
  const auto k = get_optional<std::int64_t>(j, "k").value_or(8);
  if (k < 1) throw_invalid("k must be at least 1");
  req.k = static_cast<std::size_t>(k);
  if (j.contains("filter") && !j["filter"].is_null()) {
    req.filter = predicate_from_json(j["filter"]);
  }
  return req;
}

json to_json(const PlanningRequest& req) {
  json query = json::object();
  if (req.text) query["text"] = *req.text;
  if (req.vector) {
    std::visit([&](const auto& v) { query["vector"] = v; }, req.vector->value);
  }
  json j{{"query", std::move(query)},
         {"horizon", horizon_name(req.horizon)},
         {"k", req.k}};
  if (!req.filter.empty()) j["filter"] = to_json(req.filter);
  return j;
}

}  // namespace memhub
