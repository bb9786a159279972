#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "memhub/access.hpp"
#include "memhub/codec.hpp"
#include "memhub/store.hpp"
#include "memhub/tokens.hpp"

namespace memhub {

struct HubConfig {
  StoreConfig store;
  // Bootstrap admin bearer token (MEMHUB_ADMIN_TOKEN); never persisted.
  std::optional<std::string> admin_token;
  std::string admin_agent = "admin";
  Clock clock;
  std::shared_ptr<const Embedder> embedder;
};

using QueryParams = std::multimap<std::string, std::string>;

// The request layer shared by the HTTP service, the CLI and the bindings.
// Every method runs under an already authenticated principal; its JSON
// result is exactly the body the service returns for the matching endpoint.
//
// Files in data_dir besides the log: policies.json, tokens.json,
// audit.jsonl.
class Hub {
 public:
  explicit Hub(HubConfig config);

  Hub(const Hub&) = delete;
  Hub& operator=(const Hub&) = delete;

  // Resolves a bearer token. `task_tags`, when given, must be a subset of
  // the token's bound task tags and narrows them. Failures are audited
  // under `operation` and thrown as unauthenticated.
  Principal authenticate(std::string_view bearer, const std::string& operation,
                         const std::optional<TagSet>& task_tags = {});

  // Principal for in-process administration (local CLI).
  Principal local_admin() const;

  // Routes one API request. Unknown routes are not_found.
  json dispatch(const Principal& p, const std::string& method,
                const std::string& path, const QueryParams& params,
                const json& body);

  json begin_session(const Principal& p, const json& body);
  json close_session(const Principal& p, SessionId id);
  json append(const Principal& p, const json& body);
  json get_record(const Principal& p, Seq seq);
  json list_episodes(const Principal& p, const QueryParams& params);
  json get_episode(const Principal& p, EpisodeId id);
  json query(const Principal& p, const json& body);
  json window(const Principal& p, const json& body);
  json recall(const Principal& p, const json& body);
  json curate(const Principal& p, const json& body);
  json add_policy(const Principal& p, const json& body);
  json remove_policy(const Principal& p, const std::string& id);
  json list_policies(const Principal& p);
  json audit(const Principal& p, const QueryParams& params);
  json issue_token(const Principal& p, const json& body);
  json revoke_token(const Principal& p, const std::string& id);

  Store& store() { return *store_; }
  AccessEngine& access() { return *access_; }
  TokenRegistry& tokens() { return *tokens_; }

 private:
  // Write paths: the session owner or an admin. Audited either way.
  void authorize_write(const Principal& p, const std::string& operation,
                       const json& body, bool owner);

  HubConfig config_;
  std::unique_ptr<Store> store_;
  std::unique_ptr<AccessEngine> access_;
  std::unique_ptr<TokenRegistry> tokens_;
};

// Audit operation name for a route ("query", "record.append", ...).
std::string operation_for(const std::string& method, const std::string& path);

}  // namespace memhub
