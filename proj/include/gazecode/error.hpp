#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gazecode {

enum class ErrorCode {
  InvalidArgument,
  InvalidConfiguration,
  MonotonicityViolation,
  ClosedLog,
  MissingMeta,
  DuplicateMeta,
  MalformedRecord,
  NotFound,
  Conflict,
  Storage,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::InvalidArgument: return "invalid-argument";
  case ErrorCode::InvalidConfiguration: return "invalid-configuration";
  case ErrorCode::MonotonicityViolation: return "monotonicity-violation";
  case ErrorCode::ClosedLog: return "closed-log";
  case ErrorCode::MissingMeta: return "missing-meta";
  case ErrorCode::DuplicateMeta: return "duplicate-meta";
  case ErrorCode::MalformedRecord: return "malformed-record";
  case ErrorCode::NotFound: return "not-found";
  case ErrorCode::Conflict: return "conflict";
  case ErrorCode::Storage: return "storage";
  }
  return "unknown";
}

/// Exception carrying a machine-readable code. `line()` is the 1-based
/// source line for parse errors and the offending record index for batch
/// errors; zero when not applicable.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message, std::size_t line = 0)
      : std::runtime_error(format(code, message, line)), code_(code), line_(line), message_(message) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] std::size_t line() const noexcept { return line_; }
  /// The message without the code and line prefix.
  [[nodiscard]] const std::string& message() const noexcept { return message_; }

private:
  static std::string format(ErrorCode code, const std::string& message, std::size_t line) {
    std::string out(to_string(code));
    if (line != 0) {
      out += " (line " + std::to_string(line) + ")";
    }
    out += ": ";
    out += message;
    return out;
  }

  ErrorCode code_;
  std::size_t line_;
  std::string message_;
};

} // namespace gazecode
