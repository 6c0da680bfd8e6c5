#include "soclab/errors.hpp"

namespace soclab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgs: return "InvalidArgs";
    case ErrorKind::kZeroVectorRow: return "ZeroVectorRow";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kDuplicateName: return "DuplicateName";
    case ErrorKind::kDegenerateRange: return "DegenerateRange";
    case ErrorKind::kZeroMax: return "ZeroMax";
    case ErrorKind::kEmptyOffDiagonal: return "EmptyOffDiagonal";
    case ErrorKind::kNonUnitInput: return "NonUnitInput";
    case ErrorKind::kEmptyGroup: return "EmptyGroup";
    case ErrorKind::kNotADistribution: return "NotADistribution";
    case ErrorKind::kNoRegularizer: return "NoRegularizer";
    case ErrorKind::kInvalidStep: return "InvalidStep";
    case ErrorKind::kInfeasibleSpec: return "InfeasibleSpec";
    case ErrorKind::kDivergedLoss: return "DivergedLoss";
    case ErrorKind::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::kEmptyRecords: return "EmptyRecords";
    case ErrorKind::kTooManyBins: return "TooManyBins";
    case ErrorKind::kBadMagic: return "BadMagic";
    case ErrorKind::kTruncatedFile: return "TruncatedFile";
    case ErrorKind::kNonFiniteValue: return "NonFiniteValue";
    case ErrorKind::kSchemaError: return "SchemaError";
    case ErrorKind::kCrossCheckError: return "CrossCheckError";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace soclab
