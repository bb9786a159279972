#include <openssl/crypto.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <array>
#include <fstream>
#include <sstream>

#include "memhub/error.hpp"
#include "memhub/tokens.hpp"

namespace memhub {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(),
         digest.data());
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(digest.size() * 2);
  for (unsigned char b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

std::string base64url(std::span<const unsigned char> bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
  std::string out;
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
  }
  if (bytes.size() - i == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
  } else if (bytes.size() - i == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
  }
  return out;
}

namespace {

std::string random_bytes_encoded(std::size_t n) {
  std::vector<unsigned char> buf(n);
  if (RAND_bytes(buf.data(), static_cast<int>(n)) != 1) {
    throw Error(ErrorCode::kInternal, "random source unavailable");
  }
  return base64url(buf);
}

}  // namespace

std::string random_token() { return random_bytes_encoded(32); }

TokenRegistry::TokenRegistry(std::optional<fs::path> file)
    : file_(std::move(file)) {
  if (!file_ || !fs::exists(*file_)) return;
  std::ifstream in(*file_);
  std::stringstream buf;
  buf << in.rdbuf();
  const json doc = parse_json(buf.str());
  for (const auto& t : doc) {
    entries_.push_back(Entry{
        TokenInfo{get_field<std::string>(t, "id"),
                  AgentId(get_field<std::string>(t, "agent")),
                  get_field<TagSet>(t, "roles"),
                  get_field<TagSet>(t, "task_tags"),
                  get_field<bool>(t, "admin")},
        get_field<std::string>(t, "hash"), true});
  }
}

IssuedToken TokenRegistry::issue(const AgentId& agent, TagSet roles, bool admin,
                                 TagSet task_tags) {
  validate_tags(roles);
  validate_tags(task_tags);
  std::string token = random_token();
  TokenInfo info{"tok-" + random_bytes_encoded(9), agent, std::move(roles),
                 std::move(task_tags), admin};
  std::lock_guard lock(mutex_);
  entries_.push_back(Entry{info, sha256_hex(token), true});
  persist();
  return IssuedToken{std::move(info), std::move(token)};
}

void TokenRegistry::add_bootstrap(std::string_view token, const AgentId& agent) {
  if (token.empty()) throw_invalid("bootstrap token is empty");
  std::lock_guard lock(mutex_);
  entries_.push_back(
      Entry{TokenInfo{"bootstrap", agent, {}, {}, true}, sha256_hex(token), false});
}

std::optional<TokenInfo> TokenRegistry::verify(std::string_view token) const {
  const std::string hash = sha256_hex(token);
  std::lock_guard lock(mutex_);
  std::optional<TokenInfo> found;
  // Compare against every entry in constant time per comparison.
  for (const auto& e : entries_) {
    if (CRYPTO_memcmp(e.hash_hex.data(), hash.data(), hash.size()) == 0) {
      found = e.info;
    }
  }
  return found;
}

void TokenRegistry::revoke(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto before = entries_.size();
  std::erase_if(entries_, [&](const Entry& e) { return e.info.id == id; });
  if (entries_.size() == before) throw_not_found("no token with id " + id);
  persist();
}

std::size_t TokenRegistry::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void TokenRegistry::persist() const {
  if (!file_) return;
  json doc = json::array();
  for (const auto& e : entries_) {
    if (!e.persisted) continue;
    doc.push_back(json{{"id", e.info.id},
                       {"hash", e.hash_hex},
                       {"agent", e.info.agent.str()},
                       {"roles", e.info.roles},
                       {"task_tags", e.info.task_tags},
                       {"admin", e.info.admin}});
  }
  const fs::path tmp = file_->string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << doc.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::kInternal, "cannot write token file");
  }
  fs::permissions(tmp, fs::perms::owner_read | fs::perms::owner_write);
  fs::rename(tmp, *file_);
}

json to_json(const TokenInfo& info) {
  return json{{"id", info.id},
              {"agent", info.agent.str()},
              {"roles", info.roles},
              {"task_tags", info.task_tags},
              {"admin", info.admin}};
}

}  // namespace memhub
