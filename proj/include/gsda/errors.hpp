#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gsda {

enum class ErrorCode {
  kParse,
  kEmptyCloud,
  kIo,
  kTooFewPoints,
  kUnknownClass,
  kKTooLarge,
  kDimensionMismatch,
  kBadRange,
  kConvergence,
  kConfig,
  kVersionMismatch,
  kSizeMismatch,
  kBadCount,
  kModelLoad,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this one exception type; callers branch on
// code() when they need to distinguish causes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Validation failures map to CLI exit code 2, everything else to 3.
  bool is_validation() const noexcept;

 private:
  ErrorCode code_;
};

}  // namespace gsda
