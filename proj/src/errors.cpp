#include "biasaware/errors.hpp"

namespace biasaware {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::FileError: return "FileError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::MissingSigma: return "MissingSigma";
    case ErrorKind::MissingResiduals: return "MissingResiduals";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::RankDeficientBaseline: return "RankDeficientBaseline";
    case ErrorKind::SingularWeightMatrix: return "SingularWeightMatrix";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::DegeneratePath: return "DegeneratePath";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::ZeroPenaltySolution: return "ZeroPenaltySolution";
    case ErrorKind::ZeroDenominator: return "ZeroDenominator";
    case ErrorKind::CollinearDesign: return "CollinearDesign";
    case ErrorKind::NonpositiveSd: return "NonpositiveSd";
    case ErrorKind::EmptyFeasibleSet: return "EmptyFeasibleSet";
    case ErrorKind::InsufficientModulusRange: return "InsufficientModulusRange";
  }
  return "UnknownError";
}

bool is_validation_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::FileError:
    case ErrorKind::SchemaError:
    case ErrorKind::NonFiniteValue:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::InvalidArgument:
    case ErrorKind::MissingSigma:
    case ErrorKind::MissingResiduals:
    case ErrorKind::InvalidSpec:
      return true;
    default:
      return false;
  }
}

}  // namespace biasaware
