#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "memhub/predicate.hpp"
#include "memhub/text.hpp"
#include "memhub/types.hpp"

namespace memhub {

struct Posting {
  Seq seq;
  std::uint32_t tf;
};

struct SessionState {
  SessionId id;
  AgentId agent;
  TagSet task_tags;
  TimestampMs opened_ts;
  std::optional<TimestampMs> closed_ts;
  std::vector<Seq> records;

  bool open() const { return !closed_ts.has_value(); }
};

struct AppendOptions {
  // Merged with the session's task tags.
  TagSet extra_tags;
  // Supplied by callers running their own embedder; must have dimension D.
  std::optional<std::vector<float>> embedding;
};

struct StoreOptions {
  std::shared_ptr<const Embedder> embedder;  // HashingEmbedder(D) when null
  Clock clock;                               // system clock when empty
};

class Store;

// In-memory state rebuilt from the log: records, sessions and the inverted
// index. Owned by Store, read through StoreView.
struct StoreState {
  std::vector<MemoryRecord> records;  // records[seq - 1]
  std::map<SessionId, SessionState> sessions;
  std::unordered_map<std::string, std::vector<Posting>> postings;
  std::vector<std::uint32_t> doc_lengths;
};

// A consistent read snapshot. Holds the store's shared lock for its lifetime,
// so appends wait until every view is released; do not keep one across a
// write on the same thread.
class StoreView {
 public:
  std::span<const MemoryRecord> records() const { return state_->records; }
  const MemoryRecord* find(Seq seq) const;
  Seq last_seq() const { return state_->records.size(); }

  const std::map<SessionId, SessionState>& sessions() const {
    return state_->sessions;
  }
  const SessionState* session(SessionId id) const;
  Episode episode(const SessionState& session) const;

  // Postings sorted by seq; nullptr when the term is unseen.
  const std::vector<Posting>* postings(const std::string& term) const;
  std::uint32_t doc_length(Seq seq) const {
    return state_->doc_lengths.at(seq - 1);
  }

  const Embedder& embedder() const;
  const StoreConfig& config() const;

 private:
  friend class Store;
  StoreView(const Store& store, std::shared_lock<std::shared_mutex> lock);

  const Store* store_;
  const StoreState* state_;
  std::shared_lock<std::shared_mutex> lock_;
};

// Durable, append-only record store backed by `<data_dir>/log.jsonl`.
// Single writer, many readers; a handle may be shared across threads.
class Store {
 public:
  explicit Store(StoreConfig config, StoreOptions options = {});
  ~Store();

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  SessionId begin_session(const AgentId& agent, TagSet task_tags = {});

  MemoryRecord append(SessionId session, AuthorKind author_kind,
                      const AgentId& agent, std::string content,
                      Metadata metadata = {}, AppendOptions options = {});

  // nullopt signals an empty session, which is removed instead of becoming
  // an episode.
  std::optional<Episode> close_session(SessionId session);

  MemoryRecord get_record(Seq seq) const;
  // Open sessions are returned with open == true.
  Episode get_episode(EpisodeId id) const;
  std::vector<EpisodeSummary> list_episodes(
      const StructuredPredicate& filter = {}) const;
  std::vector<MemoryRecord> scan(Seq lo, Seq hi) const;

  StoreView view() const;
  Seq last_seq() const;

  // Forces buffered lines to stable storage (per_batch mode).
  void sync();

  const StoreConfig& config() const { return config_; }
  const Embedder& embedder() const { return *embedder_; }

 private:
  friend class StoreView;

  void recover();
  void replay_line(const std::string& line, std::size_t line_no);
  void write_line(const std::string& line);
  TimestampMs next_ts();
  void index_record(const MemoryRecord& record);
  SessionState& open_session_or_throw(SessionId id);

  StoreConfig config_;
  std::shared_ptr<const Embedder> embedder_;
  Clock clock_;

  mutable std::shared_mutex mutex_;
  std::unique_ptr<StoreState> state_;
  SessionId next_session_ = 1;
  TimestampMs last_ts_ = 0;
  int log_fd_ = -1;
  int lock_fd_ = -1;
};

// Serialized log line for a record, byte-stable across reopen.
std::string serialize_record(const MemoryRecord& record);

}  // namespace memhub
