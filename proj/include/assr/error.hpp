#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace assr {

enum class ErrorCode {
  // edf-ingest
  kVersionMismatch,
  kTruncated,
  kMalformedField,
  kUnknownCode,
  kEmpty,
  kChannelNotFound,
  kInsufficientPatients,
  // preprocess
  kInvalidFrequency,
  kInvalidBand,
  kExcludedLabel,
  kEmptyInput,
  // dbn / classifiers / pipeline
  kDimensionMismatch,
  kTooLarge,
  kEmptyData,
  kEmptyCandidates,
  kSingleClass,
  kMissingState,
  kEmptySequence,
  kLengthMismatch,
  kWrongCount,
  kIoFailure,
  kInvalidConfig,
  kSchemaMismatch,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures are reported through this exception type; `code()`
// identifies the contract violation.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace assr
