#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace biasaware {

enum class ErrorKind {
  // input / validation
  FileError,
  SchemaError,
  NonFiniteValue,
  DimensionMismatch,
  InvalidArgument,
  MissingSigma,
  MissingResiduals,
  InvalidSpec,
  // numerical
  RankDeficientBaseline,
  SingularWeightMatrix,
  SingularSystem,
  DegeneratePath,
  ConvergenceFailure,
  ZeroPenaltySolution,
  ZeroDenominator,
  CollinearDesign,
  NonpositiveSd,
  EmptyFeasibleSet,
  InsufficientModulusRange,
};

std::string_view to_string(ErrorKind kind);

/// True for errors caused by bad input rather than by the numerics.
bool is_validation_error(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, std::string(to_string(kind)) + ": " + msg);
}

}  // namespace biasaware
