#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stefan {

enum class ErrorCode {
  // input / validation
  SyntaxError,
  UnknownIdentifier,
  UnboundParameter,
  EvalDomainError,
  NonFiniteCoefficient,
  EnvelopeViolation,
  InvalidArgument,
  MissingKey,
  UnknownKey,
  TypeMismatch,
  ExpressionError,
  // numerical
  StepSizeTooLarge,
  SolverSingular,
  NoConvergence,
  NonPositiveIterate,
  NonPositive,
  DomainNotLargeEnough,
  BracketInvalid,
  NoSignChange,
  TruncationTooSmall,
  BoundViolated,
  HypothesisHFailed,
  NotSpreading,
  TooManyUndecided,
  // invariant breach
  FrontRetreat,
  Internal,
};

std::string_view to_string(ErrorCode code);

/// Numerical failures (non-convergence, invalid brackets) map to 3, input
/// problems to 2 and invariant breaches to 4.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace stefan
