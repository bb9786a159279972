#pragma once

#include <memory>
#include <string>
#include <thread>

#include "memhub/hub.hpp"

namespace httplib {
class Server;
}

namespace memhub {

// HTTP/1.1 JSON front end for a Hub. Requests authenticate with
// "Authorization: Bearer <token>"; an optional "X-Memhub-Task-Tags" header
// (comma separated) narrows the token's task tags.
class HubServer {
 public:
  explicit HubServer(Hub& hub);
  ~HubServer();

  HubServer(const HubServer&) = delete;
  HubServer& operator=(const HubServer&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port.
  // Throws internal when the address cannot be bound.
  void start(const std::string& host, int port);
  // Blocks until stop() is called from elsewhere.
  void run(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  void bind(const std::string& host, int port);

  Hub& hub_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

// "host:port"; throws invalid_request on anything else.
std::pair<std::string, int> parse_address(const std::string& addr);

}  // namespace memhub
