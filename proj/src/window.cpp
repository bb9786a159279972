#include <algorithm>
#include <numeric>

#include "memhub/error.hpp"
#include "memhub/retrieval.hpp"
#include "memhub/window.hpp"

namespace memhub {

std::string_view window_form_name(WindowForm form) {
  switch (form) {
    case WindowForm::kRolling: return "rolling";
    case WindowForm::kExtracts: return "extracts";
    case WindowForm::kSummary: return "summary";
  }
  return "rolling";
}

WindowForm window_form_from_name(std::string_view name) {
  if (name == "rolling") return WindowForm::kRolling;
  if (name == "extracts") return WindowForm::kExtracts;
  if (name == "summary") return WindowForm::kSummary;
  throw_invalid("unknown window form '" + std::string(name) + "'");
}

std::string first_sentence(std::string_view content) {
  const auto end = content.find_first_of(".!?");
  std::string_view s =
      end == std::string_view::npos ? content : content.substr(0, end + 1);
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

WindowView summarize_extractive(std::span<const MemoryRecord> records,
                                std::size_t budget,
                                const TokenCounter& counter) {
  if (budget == 0) throw_invalid("budget must be at least 1");
  WindowView out;
  std::string text;
  for (const auto& r : records) {
    std::string unit = "[" + r.agent.str() + "]: " + first_sentence(r.content);
    std::string candidate = text.empty() ? unit : text + "\n" + unit;
    const std::size_t tokens = counter.count(candidate);
    if (tokens > budget) {
      out.truncated = true;
      break;
    }
    text = std::move(candidate);
    out.token_count = tokens;
    out.items.push_back({r.seq, std::move(unit)});
  }
  return out;
}

namespace {

WindowView rolling(std::span<const MemoryRecord> records, std::size_t budget,
                   const TokenCounter& counter) {
  WindowView out;
  std::size_t used = 0;
  std::size_t first = records.size();
  while (first > 0) {
    const std::size_t tokens = counter.count(records[first - 1].content);
    if (used + tokens > budget) break;
    used += tokens;
    --first;
  }
  for (std::size_t i = first; i < records.size(); ++i) {
    out.items.push_back({records[i].seq, records[i].content});
  }
  out.token_count = used;
  out.truncated = first > 0;
  return out;
}

WindowView extracts(const StoreView& view,
                    std::span<const MemoryRecord> records,
                    const std::string& focus, std::size_t budget,
                    const TokenCounter& counter) {
  std::vector<Seq> seqs;
  seqs.reserve(records.size());
  for (const auto& r : records) seqs.push_back(r.seq);
  const auto scores = bm25_scores(view, seqs, query_terms(focus));

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (scores[i] > 0.0) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return records[a].seq > records[b].seq;
  });

  // Greedy by rank: a record that does not fit is skipped and smaller,
  // lower-ranked ones may still be admitted.
  std::vector<std::size_t> admitted;
  std::size_t used = 0;
  for (std::size_t i : order) {
    const std::size_t tokens = counter.count(records[i].content);
    if (used + tokens > budget) continue;
    used += tokens;
    admitted.push_back(i);
  }
  std::sort(admitted.begin(), admitted.end());

  WindowView out;
  for (std::size_t i : admitted) {
    out.items.push_back({records[i].seq, records[i].content});
  }
  out.token_count = used;
  out.truncated = admitted.size() < records.size();
  return out;
}

}  // namespace

WindowView build_window(const StoreView& view,
                        std::span<const MemoryRecord> records,
                        const WindowPolicy& policy,
                        const TokenCounter& counter,
                        const Summarizer& summarizer) {
  if (policy.budget == 0) throw_invalid("budget must be at least 1");
  switch (policy.form) {
    case WindowForm::kRolling:
      return rolling(records, policy.budget, counter);
    case WindowForm::kExtracts:
      if (!policy.focus) throw_invalid("extracts window requires a focus");
      return extracts(view, records, *policy.focus, policy.budget, counter);
    case WindowForm::kSummary: {
      if (!summarizer) {
        return summarize_extractive(records, policy.budget, counter);
      }
      WindowView out = summarizer(records, policy.budget, counter);
      if (out.token_count > policy.budget) {
        throw Error(ErrorCode::kInternal, "summarizer exceeded the budget");
      }
      return out;
    }
  }
  throw_invalid("unknown window form");
}

WindowView build_window(const Store& store, SessionId target,
                        const WindowPolicy& policy,
                        const TokenCounter& counter) {
  auto view = store.view();
  const SessionState* s = view.session(target);
  if (!s) throw_not_found("unknown session " + std::to_string(target));
  const Episode e = view.episode(*s);
  return build_window(view, e.records, policy, counter);
}

json to_json(const WindowView& view) {
  json items = json::array();
  for (const auto& item : view.items) {
    items.push_back(json{{"seq", item.seq}, {"text", item.text}});
  }
  return json{{"items", std::move(items)},
              {"token_count", view.token_count},
              {"truncated", view.truncated}};
}

WindowRequest window_request_from_json(const json& j) {
  require_keys(j, {"target", "form", "budget", "focus"}, "window request");
  const json target = get_field<json>(j, "target");
  require_keys(target, {"session", "episode"}, "target");
  if (target.size() != 1) {
    throw_invalid("target must name exactly one of session or episode");
  }
  WindowRequest req{};
  req.episode_target = target.contains("episode");
  req.target = get_field<SessionId>(target,
                                    req.episode_target ? "episode" : "session");
  req.policy.form = window_form_from_name(get_field<std::string>(j, "form"));
  const auto budget = get_field<std::int64_t>(j, "budget");
  if (budget < 1) throw_invalid("budget must be at least 1");
  req.policy.budget = static_cast<std::size_t>(budget);
  req.policy.focus = get_optional<std::string>(j, "focus");
  if (req.policy.focus) query_terms(*req.policy.focus);
  if (req.policy.form == WindowForm::kExtracts && !req.policy.focus) {
    throw_invalid("extracts window requires a focus");
  }
  return req;
}

}  // namespace memhub
