#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "memhub/codec.hpp"
#include "memhub/error.hpp"
#include "memhub/store.hpp"

namespace memhub {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void throw_io(const std::string& what) {
  throw Error(ErrorCode::kInternal, what + ": " + std::strerror(errno));
}

[[noreturn]] void throw_corrupt(std::size_t line_no, const std::string& why) {
  throw Error(ErrorCode::kInternal, "corrupt log at line " +
                                        std::to_string(line_no) + ": " + why);
}

}  // namespace

std::string serialize_record(const MemoryRecord& record) {
  return to_json(record).dump();
}

// --- StoreView ---------------------------------------------------------------

StoreView::StoreView(const Store& store,
                     std::shared_lock<std::shared_mutex> lock)
    : store_(&store), state_(store.state_.get()), lock_(std::move(lock)) {}

const MemoryRecord* StoreView::find(Seq seq) const {
  if (seq == 0 || seq > state_->records.size()) return nullptr;
  return &state_->records[seq - 1];
}

const SessionState* StoreView::session(SessionId id) const {
  auto it = state_->sessions.find(id);
  return it == state_->sessions.end() ? nullptr : &it->second;
}

Episode StoreView::episode(const SessionState& s) const {
  Episode e{s.id, s.agent, s.task_tags, {}, s.opened_ts, s.closed_ts,
            s.open()};
  e.records.reserve(s.records.size());
  for (Seq seq : s.records) e.records.push_back(state_->records[seq - 1]);
  return e;
}

const std::vector<Posting>* StoreView::postings(const std::string& term) const {
  auto it = state_->postings.find(term);
  return it == state_->postings.end() ? nullptr : &it->second;
}

const Embedder& StoreView::embedder() const { return *store_->embedder_; }
const StoreConfig& StoreView::config() const { return store_->config_; }

// --- Store -------------------------------------------------------------------

Store::Store(StoreConfig config, StoreOptions options)
    : config_(std::move(config)),
      embedder_(std::move(options.embedder)),
      clock_(std::move(options.clock)),
      state_(std::make_unique<StoreState>()) {
  if (config_.embedding_dim == 0) {
    throw_invalid("embedding_dim must be positive");
  }
  if (config_.recency_half_life == 0) {
    throw_invalid("recency_half_life must be positive");
  }
  if (!embedder_) {
    embedder_ = std::make_shared<HashingEmbedder>(config_.embedding_dim);
  }
  if (embedder_->dimension() != config_.embedding_dim) {
    throw_invalid("embedder dimension " +
                  std::to_string(embedder_->dimension()) +
                  " does not match store dimension " +
                  std::to_string(config_.embedding_dim));
  }
  if (!clock_) clock_ = system_clock();

  std::error_code ec;
  fs::create_directories(config_.data_dir, ec);
  if (ec) {
    throw Error(ErrorCode::kInternal, "cannot create data dir " +
                                          config_.data_dir.string() + ": " +
                                          ec.message());
  }
  const auto lock_path = config_.data_dir / "LOCK";
  lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) throw_io("cannot open " + lock_path.string());
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    throw Error(ErrorCode::kInternal,
                "data dir " + config_.data_dir.string() +
                    " is in use by another process");
  }
  try {
    recover();
  } catch (...) {
    if (log_fd_ >= 0) ::close(log_fd_);
    ::close(lock_fd_);
    throw;
  }
}

Store::~Store() {
  if (log_fd_ >= 0) {
    ::fdatasync(log_fd_);
    ::close(log_fd_);
  }
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

void Store::recover() {
  const auto log_path = config_.data_dir / "log.jsonl";
  std::string contents;
  if (fs::exists(log_path)) {
    std::ifstream in(log_path, std::ios::binary);
    if (!in) throw_io("cannot read " + log_path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    contents = std::move(buf).str();
  }

  // A final line without its newline is a torn write; everything before the
  // last newline is authoritative.
  const auto last_nl = contents.rfind('\n');
  const std::size_t valid_bytes =
      last_nl == std::string::npos ? 0 : last_nl + 1;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < valid_bytes) {
    const auto nl = contents.find('\n', pos);
    ++line_no;
    replay_line(contents.substr(pos, nl - pos), line_no);
    pos = nl + 1;
  }

  log_fd_ = ::open(log_path.c_str(),
                   O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (log_fd_ < 0) throw_io("cannot open " + log_path.string());
  if (valid_bytes != contents.size()) {
    if (::ftruncate(log_fd_, static_cast<off_t>(valid_bytes)) != 0) {
      throw_io("cannot truncate torn tail of " + log_path.string());
    }
    ::fdatasync(log_fd_);
  }

  // Sessions closed while empty are dropped, as they were at close time.
  std::erase_if(state_->sessions, [](const auto& kv) {
    return !kv.second.open() && kv.second.records.empty();
  });
}

void Store::replay_line(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw_corrupt(line_no, e.what());
  }
  if (!j.is_object()) throw_corrupt(line_no, "not a JSON object");
  try {
    if (j.contains("kind")) {
      const auto kind = get_field<std::string>(j, "kind");
      const auto id = get_field<SessionId>(j, "session");
      const auto ts = get_field<TimestampMs>(j, "ts");
      last_ts_ = std::max(last_ts_, ts);
      if (kind == "begin") {
        if (id < next_session_) throw_corrupt(line_no, "session id reused");
        state_->sessions.emplace(
            id, SessionState{id, AgentId(get_field<std::string>(j, "agent")),
                             get_field<TagSet>(j, "task_tags"), ts,
                             std::nullopt, {}});
        next_session_ = id + 1;
      } else if (kind == "close") {
        auto it = state_->sessions.find(id);
        if (it == state_->sessions.end() || !it->second.open()) {
          throw_corrupt(line_no, "close of a session that is not open");
        }
        it->second.closed_ts = ts;
      } else {
        throw_corrupt(line_no, "unknown control kind '" + kind + "'");
      }
      return;
    }
    MemoryRecord record = record_from_json(j);
    if (record.seq != state_->records.size() + 1) {
      throw_corrupt(line_no, "expected seq " +
                                 std::to_string(state_->records.size() + 1) +
                                 ", found " + std::to_string(record.seq));
    }
    if (record.embedding &&
        record.embedding->size() != config_.embedding_dim) {
      throw Error(ErrorCode::kInternal,
                  "embedding dimension mismatch at line " +
                      std::to_string(line_no) + ": log has " +
                      std::to_string(record.embedding->size()) +
                      ", store configured for " +
                      std::to_string(config_.embedding_dim));
    }
    auto it = state_->sessions.find(record.session);
    if (it == state_->sessions.end() || !it->second.open()) {
      throw_corrupt(line_no, "record for a session that is not open");
    }
    last_ts_ = std::max(last_ts_, record.ts);
    it->second.records.push_back(record.seq);
    index_record(record);
    state_->records.push_back(std::move(record));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInternal) throw;
    throw_corrupt(line_no, e.what());
  }
}

void Store::write_line(const std::string& line) {
  std::string buf = line;
  buf.push_back('\n');
  const char* data = buf.data();
  std::size_t left = buf.size();
  while (left > 0) {
    const ssize_t n = ::write(log_fd_, data, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_io("log write failed");
    }
    data += n;
    left -= static_cast<std::size_t>(n);
  }
  if (config_.sync_mode == SyncMode::kPerAppend && ::fdatasync(log_fd_) != 0) {
    throw_io("log sync failed");
  }
}

TimestampMs Store::next_ts() {
  last_ts_ = std::max(last_ts_, clock_());
  return last_ts_;
}

void Store::index_record(const MemoryRecord& record) {
  const auto terms = tokenize(record.content);
  std::unordered_map<std::string, std::uint32_t> tf;
  for (const auto& t : terms) ++tf[t];
  for (auto& [term, count] : tf) {
    state_->postings[term].push_back(Posting{record.seq, count});
  }
  state_->doc_lengths.push_back(static_cast<std::uint32_t>(terms.size()));
}

SessionState& Store::open_session_or_throw(SessionId id) {
  auto it = state_->sessions.find(id);
  if (it == state_->sessions.end()) {
    throw_not_found("unknown session " + std::to_string(id));
  }
  if (!it->second.open()) {
    throw_invalid("session " + std::to_string(id) + " is closed");
  }
  return it->second;
}

SessionId Store::begin_session(const AgentId& agent, TagSet task_tags) {
  validate_tags(task_tags);
  std::unique_lock lock(mutex_);
  const SessionId id = next_session_;
  const TimestampMs ts = next_ts();
  json line{{"kind", "begin"},
            {"session", id},
            {"agent", agent.str()},
            {"task_tags", task_tags},
            {"ts", ts}};
  write_line(line.dump());
  state_->sessions.emplace(
      id, SessionState{id, agent, std::move(task_tags), ts, std::nullopt, {}});
  next_session_ = id + 1;
  return id;
}

MemoryRecord Store::append(SessionId session, AuthorKind author_kind,
                           const AgentId& agent, std::string content,
                           Metadata metadata, AppendOptions options) {
  if (content.empty()) throw_invalid("content must be non-empty");
  if (content.size() > kMaxContentBytes) {
    throw_invalid("content exceeds 1 MiB");
  }
  if (metadata.size() > kMaxMetadataEntries) {
    throw_invalid("too many metadata entries (max 16)");
  }
  validate_tags(options.extra_tags);

  // Embedding happens outside the writer lock; a throwing embedder leaves
  // nothing persisted.
  std::vector<float> embedding;
  if (options.embedding) {
    embedding = std::move(*options.embedding);
  } else {
    embedding = embedder_->embed(content);
  }
  if (embedding.size() != config_.embedding_dim) {
    throw_invalid("embedding has dimension " +
                  std::to_string(embedding.size()) + ", store expects " +
                  std::to_string(config_.embedding_dim));
  }

  std::unique_lock lock(mutex_);
  SessionState& s = open_session_or_throw(session);
  TagSet tags = s.task_tags;
  tags.insert(options.extra_tags.begin(), options.extra_tags.end());
  if (tags.size() > kMaxTags) throw_invalid("too many tags (max 32)");

  MemoryRecord record{state_->records.size() + 1,
                      session,
                      agent,
                      author_kind,
                      std::move(content),
                      std::move(embedding),
                      std::move(tags),
                      next_ts(),
                      std::move(metadata)};
  write_line(serialize_record(record));
  s.records.push_back(record.seq);
  index_record(record);
  state_->records.push_back(record);
  return record;
}

std::optional<Episode> Store::close_session(SessionId session) {
  std::unique_lock lock(mutex_);
  SessionState& s = open_session_or_throw(session);
  const TimestampMs ts = next_ts();
  json line{{"kind", "close"}, {"session", session}, {"ts", ts}};
  write_line(line.dump());
  if (s.records.empty()) {
    state_->sessions.erase(session);
    return std::nullopt;
  }
  s.closed_ts = ts;
  lock.unlock();
  return get_episode(session);
}

MemoryRecord Store::get_record(Seq seq) const {
  auto v = view();
  const MemoryRecord* r = v.find(seq);
  if (!r) throw_not_found("unknown record " + std::to_string(seq));
  return *r;
}

Episode Store::get_episode(EpisodeId id) const {
  auto v = view();
  const SessionState* s = v.session(id);
  if (!s) throw_not_found("unknown episode " + std::to_string(id));
  return v.episode(*s);
}

std::vector<EpisodeSummary> Store::list_episodes(
    const StructuredPredicate& filter) const {
  validate(filter);
  auto v = view();
  std::vector<EpisodeSummary> out;
  for (const auto& [id, s] : v.sessions()) {
    if (!filter.empty() && !matches(filter, v.episode(s))) continue;
    EpisodeSummary summary{id,          s.agent,     s.task_tags,
                           s.opened_ts, s.closed_ts, s.open(),
                           s.records.size(), std::nullopt, std::nullopt};
    if (!s.records.empty()) {
      summary.first_seq = s.records.front();
      summary.last_seq = s.records.back();
    }
    out.push_back(std::move(summary));
  }
  return out;
}

std::vector<MemoryRecord> Store::scan(Seq lo, Seq hi) const {
  if (lo > hi) throw_invalid("scan range has lo > hi");
  auto v = view();
  std::vector<MemoryRecord> out;
  const Seq last = std::min<Seq>(hi, v.last_seq());
  for (Seq s = std::max<Seq>(lo, 1); s <= last; ++s) {
    out.push_back(*v.find(s));
  }
  return out;
}

StoreView Store::view() const {
  return StoreView(*this, std::shared_lock(mutex_));
}

Seq Store::last_seq() const {
  std::shared_lock lock(mutex_);
  return state_->records.size();
}

void Store::sync() {
  std::unique_lock lock(mutex_);
  if (::fdatasync(log_fd_) != 0) throw_io("log sync failed");
}

}  // namespace memhub
