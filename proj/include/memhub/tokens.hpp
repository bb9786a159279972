#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memhub/codec.hpp"
#include "memhub/types.hpp"

namespace memhub {

struct TokenInfo {
  std::string id;
  AgentId agent;
  TagSet roles;
  TagSet task_tags;
  bool admin = false;
};

struct IssuedToken {
  TokenInfo info;
  std::string token;  // plaintext; only ever returned here
};

// Bearer tokens: 32 random bytes, base64url. Only SHA-256 digests are kept,
// in memory and in the optional tokens file.
class TokenRegistry {
 public:
  explicit TokenRegistry(std::optional<std::filesystem::path> file = {});

  IssuedToken issue(const AgentId& agent, TagSet roles, bool admin,
                    TagSet task_tags = {});
  // Registers an externally supplied admin token (not persisted).
  void add_bootstrap(std::string_view token, const AgentId& agent);
  std::optional<TokenInfo> verify(std::string_view token) const;
  void revoke(const std::string& id);
  std::size_t size() const;

 private:
  struct Entry {
    TokenInfo info;
    std::string hash_hex;
    bool persisted;
  };
  void persist() const;

  std::optional<std::filesystem::path> file_;
  mutable std::mutex mutex_;
  std::vector<Entry> entries_;
};

std::string sha256_hex(std::string_view data);
std::string base64url(std::span<const unsigned char> bytes);
std::string random_token();

json to_json(const TokenInfo& info);

}  // namespace memhub
