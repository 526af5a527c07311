#pragma once

#include <stdexcept>
#include <string>

namespace canopy {

enum class ErrorKind {
  Argument,
  Parse,
  Validation,
  Format,
  Truncated,
  Unsupported,
  Io,
  Config,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library. The kind maps 1:1 onto the C API
/// status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_argument(const std::string& what) {
  throw Error(ErrorKind::Argument, what);
}

}  // namespace canopy
