#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace intopt {

enum class ErrorKind {
  IoError,
  EmptyInput,
  InvalidIr,
  ToolMissing,
  ToolFailure,
  OverCap,
  Precondition,
  ParseError,
  SourceNotFound,
  BuildEmpty,
  EmptyCorpus,
  BackendUnavailable,
  ReplayMiss,
  RateLimited,
  MalformedStrategy,
  NoCodeRegion,
  SymbolClash,
  UnsupportedSignature,
  BuildFailure,
  TransformFailure,
  RunFailure,
  Timeout,
  KeyMismatch,
  ConfigError,
};

std::string_view to_string(ErrorKind kind);

// Every failure surfaced by the toolkit carries a kind so callers (the batch
// runner in particular) can record it instead of aborting.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string detail = {})
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        detail_(std::move(detail)) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Captured tool output or raw model response, when there is one.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace intopt
