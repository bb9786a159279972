#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "memhub/codec.hpp"
#include "memhub/types.hpp"

namespace httplib {
class Client;
}

namespace memhub {

struct HttpReply {
  int status;
  std::string body;
};

// Minimal client for the hub's HTTP API.
class HubClient {
 public:
  HubClient(const std::string& host, int port, std::string token);
  ~HubClient();

  HubClient(const HubClient&) = delete;
  HubClient& operator=(const HubClient&) = delete;

  void set_task_tags(std::optional<TagSet> tags) { task_tags_ = std::move(tags); }

  // Raw exchange; `body` is sent verbatim for POST.
  HttpReply send(const std::string& method, const std::string& path,
                 const std::string& body = "");

  // Parsed JSON on 2xx; otherwise throws the Error the server reported.
  json call(const std::string& method, const std::string& path,
            const json& body = nullptr,
            const std::multimap<std::string, std::string>& params = {});

 private:
  std::unique_ptr<httplib::Client> http_;
  std::string token_;
  std::optional<TagSet> task_tags_;
};

}  // namespace memhub
