#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lqg_adapt {

enum class ErrorCode {
  kNonConvergence,
  kSingularInnerBlock,
  kInvalidNoise,
  kUnstableArgument,
  kDimensionMismatch,
  kNotPsd,
  kAssumptionViolated,
  kNonFiniteInput,
  kDiverged,
  kInsufficientHistory,
  kEmptyData,
  kRankDeficient,
  kBadSplit,
  kSingularInnovation,
  kGainUnstable,
  kRealizationFailed,
  kParseError,
  kValidationError,
  kIoError,
};

std::string_view ToString(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// the experiment harness can classify run failures without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ToString(code)) + ": " + what),
        code_(code),
        detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace lqg_adapt
