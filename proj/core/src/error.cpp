#include "transduct/error.hpp"

namespace transduct {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kUnknownFormat: return "UnknownFormat";
    case ErrorCode::kKindMismatch: return "KindMismatch";
    case ErrorCode::kCorruptPayload: return "CorruptPayload";
    case ErrorCode::kDimensionError: return "DimensionError";
    case ErrorCode::kZeroNormRow: return "ZeroNormRow";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidK: return "InvalidK";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kDegenerateSigma: return "DegenerateSigma";
    case ErrorCode::kNonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::kNonFiniteRow: return "NonFiniteRow";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace transduct
