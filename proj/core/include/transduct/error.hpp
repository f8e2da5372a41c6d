#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace transduct {

enum class ErrorCode {
  kUnknownFormat,
  kKindMismatch,
  kCorruptPayload,
  kDimensionError,
  kZeroNormRow,
  kIoError,
  kInvalidK,
  kTooLarge,
  kDegenerateSigma,
  kNonFiniteObjective,
  kNonFiniteRow,
  kConfigError,
  kLengthMismatch,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. The code identifies the category so
/// callers (the CLI in particular) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace transduct
