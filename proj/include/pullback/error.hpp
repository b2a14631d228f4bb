#pragma once

#include <stdexcept>
#include <string>

namespace pullback {

/// Broad failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  invalid_argument,
  shape_mismatch,
  numeric,
  io,
  schema,
  dimension_mismatch,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when a flow layer produces a non-finite value.
class OverflowError : public Error {
 public:
  OverflowError(std::size_t layer, const std::string& message)
      : Error(ErrorKind::numeric, message), layer_(layer) {}

  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace pullback
