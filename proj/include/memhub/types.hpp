#pragma once

#include <atomic>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace memhub {

using Seq = std::uint64_t;
using SessionId = std::uint64_t;
using EpisodeId = SessionId;
using TimestampMs = std::int64_t;
using Metadata = std::map<std::string, std::string>;
using TagSet = std::set<std::string>;

inline constexpr std::size_t kMaxIdentifierBytes = 128;
inline constexpr std::size_t kMaxContentBytes = 1 << 20;
inline constexpr std::size_t kMaxTags = 32;
inline constexpr std::size_t kMaxMetadataEntries = 16;

// True when `value` is 1..128 bytes drawn from [A-Za-z0-9_.-].
bool is_valid_identifier(std::string_view value);

// Validates a tag with the same charset rules as AgentId; throws
// invalid_request otherwise.
void validate_tag(std::string_view tag);
void validate_tags(const TagSet& tags);

class AgentId {
 public:
  explicit AgentId(std::string value);

  const std::string& str() const noexcept { return value_; }

  friend bool operator==(const AgentId&, const AgentId&) = default;
  friend auto operator<=>(const AgentId&, const AgentId&) = default;

 private:
  std::string value_;
};

enum class AuthorKind { kUser, kAgent, kSystem, kTool };

std::string_view author_kind_name(AuthorKind kind);
AuthorKind author_kind_from_name(std::string_view name);

struct MemoryRecord {
  Seq seq;
  SessionId session;
  AgentId agent;
  AuthorKind author_kind;
  std::string content;
  std::optional<std::vector<float>> embedding;
  TagSet task_tags;
  TimestampMs ts;
  Metadata metadata;

  friend bool operator==(const MemoryRecord&, const MemoryRecord&) = default;
};

struct Episode {
  EpisodeId id;
  AgentId agent;
  TagSet task_tags;
  std::vector<MemoryRecord> records;
  TimestampMs opened_ts;
  std::optional<TimestampMs> closed_ts;
  bool open;
};

struct EpisodeSummary {
  EpisodeId id;
  AgentId agent;
  TagSet task_tags;
  TimestampMs opened_ts;
  std::optional<TimestampMs> closed_ts;
  bool open;
  std::size_t record_count;
  std::optional<Seq> first_seq;
  std::optional<Seq> last_seq;
};

enum class SyncMode { kPerAppend, kPerBatch };

struct StoreConfig {
  std::filesystem::path data_dir;
  std::size_t embedding_dim = 64;
  SyncMode sync_mode = SyncMode::kPerAppend;
  std::uint64_t recency_half_life = 100;
};

// Milliseconds since the Unix epoch, UTC.
using Clock = std::function<TimestampMs()>;

Clock system_clock();

// A clock the caller advances by hand; used by simulations and tests.
class ManualClock {
 public:
  explicit ManualClock(TimestampMs start = 0) : now_(start) {}

  TimestampMs now() const { return now_.load(); }
  void advance(TimestampMs delta_ms) { now_ += delta_ms; }
  void set(TimestampMs value) { now_ = value; }

  Clock as_clock() {
    return [this] { return now_.load(); };
  }

 private:
  std::atomic<TimestampMs> now_;
};

}  // namespace memhub
