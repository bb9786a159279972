#include <httplib.h>

#include "memhub/client.hpp"
#include "memhub/error.hpp"

namespace memhub {

HubClient::HubClient(const std::string& host, int port, std::string token)
    : http_(std::make_unique<httplib::Client>(host, port)),
      token_(std::move(token)) {
  http_->set_keep_alive(true);
  http_->set_tcp_nodelay(true);
}

HubClient::~HubClient() = default;

HttpReply HubClient::send(const std::string& method, const std::string& path,
                          const std::string& body) {
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
  if (task_tags_) {
    std::string joined;
    for (const auto& t : *task_tags_) {
      if (!joined.empty()) joined += ',';
      joined += t;
    }
    headers.emplace("X-Memhub-Task-Tags", joined);
  }
  httplib::Result res;
  if (method == "GET") {
    res = http_->Get(path, headers);
  } else if (method == "POST") {
    res = http_->Post(path, headers, body, "application/json");
  } else if (method == "DELETE") {
    res = http_->Delete(path, headers);
  } else {
    throw_invalid("unsupported method " + method);
  }
  if (!res) {
    throw Error(ErrorCode::kInternal,
                "request failed: " + httplib::to_string(res.error()));
  }
  return HttpReply{res->status, res->body};
}

json HubClient::call(const std::string& method, const std::string& path,
                     const json& body,
                     const std::multimap<std::string, std::string>& params) {
  const HttpReply reply =
      send(method, params.empty() ? path : httplib::append_query_params(path, params),
           body.is_null() ? std::string() : body.dump());
  json doc;
  try {
    doc = json::parse(reply.body);
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInternal, "malformed response from server");
  }
  if (reply.status >= 200 && reply.status < 300) return doc;
  ErrorCode code = ErrorCode::kInternal;
  std::string message = "HTTP " + std::to_string(reply.status);
  if (doc.contains("error")) {
    code = error_code_from_name(doc["error"].value("code", "internal"));
    message = doc["error"].value("message", message);
  }
  throw Error(code, message);
}

}  // namespace memhub
