#include <httplib.h>

#include <charconv>

#include "memhub/server.hpp"

namespace memhub {

namespace {

std::optional<TagSet> header_task_tags(const httplib::Request& req) {
  if (!req.has_header("X-Memhub-Task-Tags")) return std::nullopt;
  TagSet tags;
  const std::string raw = req.get_header_value("X-Memhub-Task-Tags");
  std::size_t i = 0;
  while (i <= raw.size()) {
    auto j = raw.find(',', i);
    if (j == std::string::npos) j = raw.size();
    std::string t = raw.substr(i, j - i);
    while (!t.empty() && t.front() == ' ') t.erase(t.begin());
    while (!t.empty() && t.back() == ' ') t.pop_back();
    if (!t.empty()) tags.insert(std::move(t));
    i = j + 1;
  }
  return tags;
}

json error_body(const Error& e) {
  return json{{"error",
               {{"code", error_code_name(e.code())}, {"message", e.what()}}}};
}

}  // namespace

std::pair<std::string, int> parse_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw_invalid("address must be host:port, got '" + addr + "'");
  }
  int port = -1;
  const char* first = addr.data() + colon + 1;
  const char* last = addr.data() + addr.size();
  const auto [ptr, ec] = std::from_chars(first, last, port);
  if (ec != std::errc() || ptr != last || port < 0 || port > 65535) {
    throw_invalid("bad port in '" + addr + "'");
  }
  return {addr.substr(0, colon), port};
}

HubServer::HubServer(Hub& hub)
    : hub_(hub), server_(std::make_unique<httplib::Server>()) {
  server_->set_tcp_nodelay(true);
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    json out;
    int status = 200;
    try {
      std::string bearer;
      const std::string auth = req.get_header_value("Authorization");
      if (auth.rfind("Bearer ", 0) == 0) bearer = auth.substr(7);
      const Principal p = hub_.authenticate(
          bearer, operation_for(req.method, req.path), header_task_tags(req));
      json body = nullptr;
      if (!req.body.empty()) body = parse_json(req.body);
      out = hub_.dispatch(p, req.method, req.path, req.params, body);
    } catch (const Error& e) {
      status = http_status(e.code());
      out = error_body(e);
    } catch (const std::exception& e) {
      status = 500;
      out = error_body(Error(ErrorCode::kInternal, e.what()));
    }
    res.status = status;
    res.set_content(out.dump(), "application/json");
  };
  server_->Get(R"(/.*)", handler);
  server_->Post(R"(/.*)", handler);
  server_->Delete(R"(/.*)", handler);
}

HubServer::~HubServer() { stop(); }

void HubServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
    if (port_ < 0) port_ = 0;
  } else if (server_->bind_to_port(host, port)) {
    port_ = port;
  }
  if (port_ <= 0) {
    throw Error(ErrorCode::kInternal,
                "cannot bind " + host + ":" + std::to_string(port));
  }
}

void HubServer::start(const std::string& host, int port) {
  bind(host, port);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void HubServer::run(const std::string& host, int port) {
  bind(host, port);
  server_->listen_after_bind();
}

void HubServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace memhub
