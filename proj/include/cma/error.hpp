#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cma {

enum class ErrorCode {
  kHorizonViolation,
  kNonPositiveDepth,
  kDegenerateBoundary,
  kLaneNotVisible,
  kMissingLane,
  kShapeMismatch,
  kEmptyDataset,
  kDivergenceDetected,
  kDimensionMismatch,
  kEmptyInput,
  kConfigInvalid,
  kIoError,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every recoverable failure in the library is reported through this type so
// callers can branch on code() instead of parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cma
