#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace iqpp {

// Named failure conditions surfaced by every module. The CLI maps any of
// these to exit status 2 (config/input error).
enum class ErrorCode {
  kDimensionMismatch,
  kNonFiniteValue,
  kDuplicateId,
  kFormatError,
  kUnknownLabel,
  kUnknownDocId,
  kUnknownQueryId,
  kEmptyRelevantSet,
  kMissingDetections,
  kKTooLarge,
  kDegenerateLabels,
  kEmptyList,
  kZeroVector,
  kLengthMismatch,
  kNormalizationMismatch,
  kTooFewQueries,
  kTooFewRows,
  kMissingScores,
  kInvalidRange,
  kInvalidArgument,
  kIoError,
  kConfigError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace iqpp
