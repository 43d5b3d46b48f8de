#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace imdn {

enum class ErrorCode {
  shape_mismatch,
  invalid_argument,
  invalid_config,
  io_failure,
  bad_format,
  graph_cycle,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every recoverable failure in the library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace imdn
