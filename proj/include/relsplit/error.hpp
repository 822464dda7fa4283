#ifndef RELSPLIT_ERROR_HPP
#define RELSPLIT_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace relsplit {

enum class ErrorCode {
  // corpus
  ParseError,
  DuplicateId,
  EmptyPath,
  EmptySegment,
  InvalidSpec,
  // splitkit
  TooFewGroups,
  CoverageError,
  // encode
  EmptyField,
  ReservedMarker,
  ProviderError,
  MissingEntry,
  // model
  DimMismatch,
  EmptyBatch,
  NonFiniteLoss,
  ConfigMismatch,
  FormatError,
  // metrics
  IdMismatch,
  OutOfRange,
  // generic
  IoError,
  InvalidArgument,
  LeakageDetected,
  InvariantViolation,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library. `code()` identifies the contract that
/// was violated; `what()` carries the human-readable detail.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code), detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string &detail() const noexcept { return detail_; }

private:
  ErrorCode code_;
  std::string detail_;
};

} // namespace relsplit

#endif // RELSPLIT_ERROR_HPP
