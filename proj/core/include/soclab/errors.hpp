#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace soclab {

enum class ErrorKind {
  kInvalidArgs,
  kZeroVectorRow,
  kDimensionMismatch,
  kDuplicateName,
  kDegenerateRange,
  kZeroMax,
  kEmptyOffDiagonal,
  kNonUnitInput,
  kEmptyGroup,
  kNotADistribution,
  kNoRegularizer,
  kInvalidStep,
  kInfeasibleSpec,
  kDivergedLoss,
  kLabelOutOfRange,
  kEmptyRecords,
  kTooManyBins,
  kBadMagic,
  kTruncatedFile,
  kNonFiniteValue,
  kSchemaError,
  kCrossCheckError,
  kIoError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace soclab
