#include <cmath>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "memhub/error.hpp"
#include "memhub/text.hpp"

namespace memhub {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> terms;
  std::string current;
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(text.data());
  const auto length = static_cast<std::int32_t>(text.size());
  std::int32_t i = 0;
  while (i < length) {
    UChar32 cp;
    U8_NEXT(bytes, i, length, cp);
    if (cp >= 0 && u_isalnum(cp)) {
      UChar32 lower = u_tolower(cp);
      char buf[U8_MAX_LENGTH];
      std::int32_t n = 0;
      U8_APPEND_UNSAFE(reinterpret_cast<std::uint8_t*>(buf), n, lower);
      current.append(buf, static_cast<std::size_t>(n));
    } else if (!current.empty()) {
      terms.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) terms.push_back(std::move(current));
  return terms;
}

std::size_t TermCounter::count(std::string_view text) const {
  return tokenize(text).size();
}

const TokenCounter& default_token_counter() {
  static const TermCounter counter;
  return counter;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

HashingEmbedder::HashingEmbedder(std::size_t dimension)
    : dimension_(dimension) {
  if (dimension_ == 0) throw_invalid("embedding dimension must be positive");
}

std::vector<float> HashingEmbedder::embed(std::string_view text) const {
  std::vector<double> acc(dimension_, 0.0);
  for (const auto& term : tokenize(text)) {
    const std::uint64_t h = fnv1a64(term);
    acc[h % dimension_] += (h >> 63) == 0 ? 1.0 : -1.0;
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  std::vector<float> out(dimension_, 0.0f);
  if (norm == 0.0) return out;
  norm = std::sqrt(norm);
  for (std::size_t i = 0; i < dimension_; ++i) {
    out[i] = static_cast<float>(acc[i] / norm);
  }
  return out;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw_invalid("vector dimension mismatch: " + std::to_string(a.size()) +
                  " vs " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace memhub
