#include "stefan/error.hpp"

namespace stefan {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownIdentifier: return "UnknownIdentifier";
    case ErrorCode::UnboundParameter: return "UnboundParameter";
    case ErrorCode::EvalDomainError: return "EvalDomainError";
    case ErrorCode::NonFiniteCoefficient: return "NonFiniteCoefficient";
    case ErrorCode::EnvelopeViolation: return "EnvelopeViolation";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingKey: return "MissingKey";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::ExpressionError: return "ExpressionError";
    case ErrorCode::StepSizeTooLarge: return "StepSizeTooLarge";
    case ErrorCode::SolverSingular: return "SolverSingular";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NonPositiveIterate: return "NonPositiveIterate";
    case ErrorCode::NonPositive: return "NonPositive";
    case ErrorCode::DomainNotLargeEnough: return "DomainNotLargeEnough";
    case ErrorCode::BracketInvalid: return "BracketInvalid";
    case ErrorCode::NoSignChange: return "NoSignChange";
    case ErrorCode::TruncationTooSmall: return "TruncationTooSmall";
    case ErrorCode::BoundViolated: return "BoundViolated";
    case ErrorCode::HypothesisHFailed: return "HypothesisHFailed";
    case ErrorCode::NotSpreading: return "NotSpreading";
    case ErrorCode::TooManyUndecided: return "TooManyUndecided";
    case ErrorCode::FrontRetreat: return "FrontRetreat";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SyntaxError:
    case ErrorCode::UnknownIdentifier:
    case ErrorCode::UnboundParameter:
    case ErrorCode::EvalDomainError:
    case ErrorCode::NonFiniteCoefficient:
    case ErrorCode::EnvelopeViolation:
    case ErrorCode::InvalidArgument:
    case ErrorCode::MissingKey:
    case ErrorCode::UnknownKey:
    case ErrorCode::TypeMismatch:
    case ErrorCode::ExpressionError:
    case ErrorCode::HypothesisHFailed:
      return 2;
    case ErrorCode::FrontRetreat:
    case ErrorCode::NonPositiveIterate:
    case ErrorCode::Internal:
      return 4;
    default:
      return 3;
  }
}

}  // namespace stefan
