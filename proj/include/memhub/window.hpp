#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memhub/codec.hpp"
#include "memhub/store.hpp"
#include "memhub/text.hpp"

namespace memhub {

enum class WindowForm { kRolling, kExtracts, kSummary };

std::string_view window_form_name(WindowForm form);
WindowForm window_form_from_name(std::string_view name);

struct WindowPolicy {
  WindowForm form = WindowForm::kRolling;
  std::size_t budget = 1;
  std::optional<std::string> focus;  // required for extracts
};

struct WindowItem {
  Seq seq;
  std::string text;

  friend bool operator==(const WindowItem&, const WindowItem&) = default;
};

struct WindowView {
  std::vector<WindowItem> items;  // seq ascending
  std::size_t token_count = 0;
  bool truncated = false;

  friend bool operator==(const WindowView&, const WindowView&) = default;
};

// Hook for an abstractive summarizer (e.g. an LLM). It must keep
// token_count within the budget; build_window rejects output that does not.
using Summarizer = std::function<WindowView(
    std::span<const MemoryRecord> records, std::size_t budget,
    const TokenCounter& counter)>;

// The first sentence of `content`: up to and including the first '.', '!' or
// '?', else the whole content; surrounding whitespace trimmed.
std::string first_sentence(std::string_view content);

// Per record in seq order, "[agent]: <first sentence>", newline-joined;
// stops before the first unit that would push the total over `budget`.
WindowView summarize_extractive(std::span<const MemoryRecord> records,
                                std::size_t budget,
                                const TokenCounter& counter =
                                    default_token_counter());

// Builds a window over `records` (seq ascending). For extracts, BM25 is
// computed with the store view over exactly these records.
WindowView build_window(const StoreView& view,
                        std::span<const MemoryRecord> records,
                        const WindowPolicy& policy,
                        const TokenCounter& counter = default_token_counter(),
                        const Summarizer& summarizer = nullptr);

// Window over a session (open or closed) by id.
WindowView build_window(const Store& store, SessionId target,
                        const WindowPolicy& policy,
                        const TokenCounter& counter = default_token_counter());

json to_json(const WindowView& view);

struct WindowRequest {
  SessionId target;
  bool episode_target;  // {"episode": id} rather than {"session": id}
  WindowPolicy policy;
};

WindowRequest window_request_from_json(const json& j);

}  // namespace memhub
