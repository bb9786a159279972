#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace memhub {

// The six failure classes surfaced by every layer, from the store up to the
// HTTP service.
enum class ErrorCode {
  kUnauthenticated,
  kForbidden,
  kNotFound,
  kInvalidRequest,
  kQuotaExceeded,
  kInternal,
};

std::string_view error_code_name(ErrorCode code);
ErrorCode error_code_from_name(std::string_view name);
int http_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_invalid(const std::string& message) {
  throw Error(ErrorCode::kInvalidRequest, message);
}

[[noreturn]] inline void throw_not_found(const std::string& message) {
  throw Error(ErrorCode::kNotFound, message);
}

}  // namespace memhub
