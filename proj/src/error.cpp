#include "cma/error.hpp"

namespace cma {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kHorizonViolation: return "HorizonViolation";
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kDegenerateBoundary: return "DegenerateBoundary";
    case ErrorCode::kLaneNotVisible: return "LaneNotVisible";
    case ErrorCode::kMissingLane: return "MissingLane";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kDivergenceDetected: return "DivergenceDetected";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace cma
