#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace memhub {

// Unicode-lowercases `text` and splits it on every non-alphanumeric code
// point. Empty terms are dropped; order and duplicates are kept. Malformed
// UTF-8 bytes act as separators.
std::vector<std::string> tokenize(std::string_view text);

// Token accounting used by history windows. Budgets are relative to the
// counter in use.
class TokenCounter {
 public:
  virtual ~TokenCounter() = default;
  virtual std::size_t count(std::string_view text) const = 0;
};

// Counts terms produced by tokenize().
class TermCounter final : public TokenCounter {
 public:
  std::size_t count(std::string_view text) const override;
};

const TokenCounter& default_token_counter();

// Text -> fixed-dimension vector. Implementations must be deterministic.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<float> embed(std::string_view text) const = 0;
};

// Signed feature hashing of tokenize(text): each term's 64-bit FNV-1a hash h
// adds +1 (bit 63 clear) or -1 (bit 63 set) to bucket h mod D, then the vector
// is L2-normalized. An all-zero accumulation stays all-zero.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dimension = 64);

  std::size_t dimension() const override { return dimension_; }
  std::vector<float> embed(std::string_view text) const override;

 private:
  std::size_t dimension_;
};

std::uint64_t fnv1a64(std::string_view bytes);

// Cosine similarity in double precision; 0 when either side is the zero
// vector. Sizes must match.
double cosine(std::span<const float> a, std::span<const float> b);

}  // namespace memhub
