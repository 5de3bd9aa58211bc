#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace cvner {

/// Machine-readable failure categories shared by the library, CLI and service.
enum class ErrorCode {
  InvalidArgument,
  ParseError,
  UnsupportedVersion,
  InvalidDataset,
  SpanOutOfBounds,
  SpanOverlap,
  UnknownEntityType,
  UnknownSection,
  NotFound,
  StateViolation,
  VersionConflict,
  Busy,
  Infeasible,
  Io,
};

const char* to_string(ErrorCode code);

/// Base exception; carries a code and optional key/value context
/// (line numbers, offsets, ids) so callers can render structured errors.
class Error : public std::runtime_error {
 public:
  using Context = std::map<std::string, std::string>;

  Error(ErrorCode code, const std::string& message, Context context = {})
      : std::runtime_error(message), code_(code), context_(std::move(context)) {}

  ErrorCode code() const noexcept { return code_; }
  const Context& context() const noexcept { return context_; }

 private:
  ErrorCode code_;
  Context context_;
};

}  // namespace cvner
