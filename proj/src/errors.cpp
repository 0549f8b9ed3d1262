#include "gsda/errors.hpp"

namespace gsda {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kEmptyCloud: return "EmptyCloud";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kUnknownClass: return "UnknownClass";
    case ErrorCode::kKTooLarge: return "KTooLarge";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kBadRange: return "BadRange";
    case ErrorCode::kConvergence: return "ConvergenceFailure";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kBadCount: return "BadCount";
    case ErrorCode::kModelLoad: return "ModelLoadError";
  }
  return "Error";
}

bool Error::is_validation() const noexcept {
  switch (code_) {
    case ErrorCode::kConvergence:
    case ErrorCode::kIo:
      return false;
    default:
      return true;
  }
}

}  // namespace gsda
