#pragma once

#include <stdexcept>
#include <string>

namespace hieum {

enum class ErrorCode {
  InvalidArgument,
  MissingFrame,
  ShapeMismatch,
  ParseError,
  InvalidConfig,
  Io,
  Diverged,
  EmptyCloud,
  InvalidKernel,
  GraphStale,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure in the library surfaces as an Error carrying one of the codes
// above; the C API maps them one-to-one onto status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace hieum
