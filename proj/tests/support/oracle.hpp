#pragma once

// Brute-force reference versions of the scoring rules. They only look at the
// records the test itself appended, never at store internals.

#include <stdlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "memhub/predicate.hpp"
#include "memhub/store.hpp"

namespace oracle {

using memhub::MemoryRecord;
using memhub::Seq;

class TempDir {
 public:
  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "memhub-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// ASCII-only splitter; agrees with the library tokenizer on ASCII text.
inline std::vector<std::string> terms(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::vector<double> hashed_embedding(const std::string& text,
                                            std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  for (const auto& t : terms(text)) {
    const auto h = fnv(t);
    v[h % dim] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    for (double& x : v) x /= std::sqrt(norm);
  }
  return v;
}

inline double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * double(b[i]);
    na += double(a[i]) * double(a[i]);
    nb += double(b[i]) * double(b[i]);
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline std::vector<std::string> query_terms(const std::string& text) {
  auto t = terms(text);
  std::set<std::string> uniq(t.begin(), t.end());
  return {uniq.begin(), uniq.end()};
}

// Okapi BM25, k1 = 1.2, b = 0.75, statistics over `docs` only.
inline std::vector<double> bm25(const std::vector<MemoryRecord>& docs,
                                const std::string& query) {
  const double k1 = 1.2, b = 0.75;
  std::vector<double> scores(docs.size(), 0.0);
  if (docs.empty()) return scores;
  std::vector<std::vector<std::string>> toks;
  double total = 0.0;
  for (const auto& d : docs) {
    toks.push_back(terms(d.content));
    total += static_cast<double>(toks.back().size());
  }
  const double n = static_cast<double>(docs.size());
  const double avgdl = total / n;
  for (const auto& q : query_terms(query)) {
    double df = 0.0;
    for (const auto& t : toks) {
      if (std::find(t.begin(), t.end(), q) != t.end()) df += 1.0;
    }
    if (df == 0.0) continue;
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const double tf =
          static_cast<double>(std::count(toks[i].begin(), toks[i].end(), q));
      if (tf == 0.0) continue;
      const double dl = static_cast<double>(toks[i].size());
      scores[i] += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
    }
  }
  return scores;
}

inline std::vector<double> minmax(const std::vector<double>& v) {
  std::vector<double> out(v.size(), 0.0);
  if (v.empty()) return out;
  const double lo = *std::min_element(v.begin(), v.end());
  const double hi = *std::max_element(v.begin(), v.end());
  if (hi - lo <= 0.0) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / (hi - lo);
  return out;
}

struct Hit {
  Seq seq;
  double score;
};

inline std::vector<Hit> rank(std::vector<Hit> hits, std::size_t k) {
  std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.seq > b.seq;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

// Record-level relevance, unsorted. Text only keeps BM25 > 0.
inline std::vector<Hit> relevance(const std::vector<MemoryRecord>& docs,
                                  const std::optional<std::string>& text,
                                  const std::optional<std::vector<float>>& vec,
                                  double alpha) {
  std::vector<Hit> out;
  std::vector<double> lex, sem;
  if (text) lex = bm25(docs, *text);
  if (vec) {
    for (const auto& d : docs) {
      sem.push_back(d.embedding ? cosine(*d.embedding, *vec) : 0.0);
    }
  }
  if (text && !vec) {
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (lex[i] > 0.0) out.push_back({docs[i].seq, lex[i]});
    }
  } else if (vec && !text) {
    for (std::size_t i = 0; i < docs.size(); ++i) {
      out.push_back({docs[i].seq, sem[i]});
    }
  } else {
    const auto nl = minmax(lex);
    const auto ns = minmax(sem);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      out.push_back({docs[i].seq, alpha * nl[i] + (1.0 - alpha) * ns[i]});
    }
  }
  return out;
}

inline double recency(Seq seq, Seq seq_max, double half_life) {
  return std::pow(2.0, -static_cast<double>(seq_max - seq) / half_life);
}

// A random predicate drawn from the clauses the oracle can evaluate itself.
struct Filter {
  std::optional<std::set<std::string>> agents;
  std::optional<std::pair<Seq, Seq>> seq;
  std::optional<std::set<std::string>> any_tags;
  std::optional<std::set<memhub::AuthorKind>> kinds;
  std::optional<std::set<memhub::SessionId>> sessions;

  bool admits(const MemoryRecord& r) const {
    if (agents && !agents->count(r.agent.str())) return false;
    if (seq && (r.seq < seq->first || r.seq > seq->second)) return false;
    if (kinds && !kinds->count(r.author_kind)) return false;
    if (sessions && !sessions->count(r.session)) return false;
    if (any_tags) {
      bool hit = false;
      for (const auto& t : *any_tags) hit = hit || r.task_tags.count(t);
      if (!hit) return false;
    }
    return true;
  }

  memhub::StructuredPredicate predicate() const {
    memhub::StructuredPredicate p;
    p.agents = agents;
    if (seq) p.seq = memhub::Range<Seq>{seq->first, seq->second};
    p.has_any_tags = any_tags;
    p.author_kinds = kinds;
    p.sessions = sessions;
    return p;
  }
};

inline const std::vector<std::string>& agent_pool() {
  static const std::vector<std::string> pool = {"a0", "a1", "a2", "a3"};
  return pool;
}

inline const std::vector<std::string>& tag_pool() {
  static const std::vector<std::string> pool = {"reef", "lake", "soil",
                                                "air"};
  return pool;
}

inline std::vector<std::string> make_vocab(std::mt19937_64& rng,
                                           std::size_t size) {
  std::vector<std::string> vocab;
  std::set<std::string> seen;
  const std::string letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
  while (vocab.size() < size) {
    std::string w;
    const auto len = 2 + rng() % 5;
    for (std::size_t i = 0; i < len; ++i) w += letters[rng() % letters.size()];
    if (rng() % 4 == 0) w += std::to_string(rng() % 10);
    std::string lower = w;
    for (char& c : lower) c = static_cast<char>(std::tolower(c));
    if (seen.insert(lower).second) vocab.push_back(w);
  }
  return vocab;
}

inline std::string make_text(std::mt19937_64& rng,
                             const std::vector<std::string>& vocab,
                             std::size_t max_words) {
  static const char* seps[] = {" ", " ", " ", ", ", ". ", "! ", "? ", "-"};
  const auto words = 1 + rng() % max_words;
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) out += seps[rng() % 8];
    out += vocab[rng() % vocab.size()];
  }
  if (rng() % 3 == 0) out += ".";
  return out;
}

inline std::vector<float> random_vector(std::mt19937_64& rng, std::size_t dim) {
  std::vector<float> v(dim, 0.0f);
  if (rng() % 20 == 0) return v;
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (auto& x : v) x = u(rng);
  return v;
}

struct Corpus {
  TempDir dir;
  std::unique_ptr<memhub::Store> store;
  std::vector<std::string> vocab;
  std::vector<MemoryRecord> records;
  std::vector<memhub::SessionId> closed;
};

struct CorpusShape {
  std::size_t max_records = 200;
  std::size_t max_vocab = 50;
  std::size_t max_words = 12;
  bool explicit_embeddings = true;
  bool close_all = false;
};

// Random sessions from a few agents, each record with random tags, kind and
// (sometimes) a caller-supplied embedding.
inline std::unique_ptr<Corpus> make_corpus(std::mt19937_64& rng,
                                           const CorpusShape& shape = {}) {
  auto c = std::make_unique<Corpus>();
  memhub::StoreConfig cfg;
  cfg.data_dir = c->dir.path();
  cfg.sync_mode = memhub::SyncMode::kPerBatch;
  auto clock = std::make_shared<memhub::ManualClock>(1'700'000'000'000);
  c->store = std::make_unique<memhub::Store>(
      cfg, memhub::StoreOptions{nullptr, [clock] {
                                  clock->advance(1000);
                                  return clock->now();
                                }});
  c->vocab = make_vocab(rng, 5 + rng() % (shape.max_vocab - 4));
  const std::size_t n = 1 + rng() % shape.max_records;

  std::optional<memhub::SessionId> open;
  std::string owner;
  for (std::size_t i = 0; i < n; ++i) {
    if (!open || rng() % 6 == 0) {
      if (open) {
        if (shape.close_all || rng() % 4 != 0) {
          c->store->close_session(*open);
          c->closed.push_back(*open);
        }
      }
      owner = agent_pool()[rng() % agent_pool().size()];
      memhub::TagSet tags;
      if (rng() % 2) tags.insert(tag_pool()[rng() % tag_pool().size()]);
      open = c->store->begin_session(memhub::AgentId(owner), tags);
    }
    memhub::AppendOptions opts;
    if (rng() % 3 == 0) opts.extra_tags.insert(tag_pool()[rng() % tag_pool().size()]);
    if (shape.explicit_embeddings && rng() % 3 == 0) {
      opts.embedding = random_vector(rng, cfg.embedding_dim);
    }
    const auto kind = static_cast<memhub::AuthorKind>(rng() % 4);
    c->records.push_back(c->store->append(
        *open, kind, memhub::AgentId(owner),
        make_text(rng, c->vocab, shape.max_words), {}, std::move(opts)));
  }
  if (open && (shape.close_all || rng() % 2)) {
    c->store->close_session(*open);
    c->closed.push_back(*open);
  }
  return c;
}

inline Filter random_filter(std::mt19937_64& rng, Seq last_seq) {
  Filter f;
  if (rng() % 3 == 0) {
    f.agents.emplace();
    for (const auto& a : agent_pool()) {
      if (rng() % 2) f.agents->insert(a);
    }
  }
  if (rng() % 3 == 0 && last_seq > 0) {
    Seq a = 1 + rng() % last_seq, b = 1 + rng() % last_seq;
    f.seq = std::make_pair(std::min(a, b), std::max(a, b));
  }
  if (rng() % 4 == 0) {
    f.any_tags.emplace();
    for (const auto& t : tag_pool()) {
      if (rng() % 2) f.any_tags->insert(t);
    }
  }
  if (rng() % 5 == 0) {
    f.kinds.emplace();
    for (int k = 0; k < 4; ++k) {
      if (rng() % 2) f.kinds->insert(static_cast<memhub::AuthorKind>(k));
    }
  }
  return f;
}

inline std::vector<MemoryRecord> select(const std::vector<MemoryRecord>& all,
                                        const Filter& f) {
  std::vector<MemoryRecord> out;
  for (const auto& r : all) {
    if (f.admits(r)) out.push_back(r);
  }
  return out;
}

// A query text built from corpus words, sometimes with an unseen word.
inline std::string random_query(std::mt19937_64& rng,
                                const std::vector<std::string>& vocab) {
  std::string q;
  const auto words = 1 + rng() % 3;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) q += ' ';
    q += rng() % 8 == 0 ? std::string("unseenword") : vocab[rng() % vocab.size()];
  }
  return q;
}

}  // namespace oracle
