#include "dominet/error.hpp"

namespace dominet {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Usage:
    case ErrorCode::Spec:
      return 1;
    case ErrorCode::InvalidProbability:
    case ErrorCode::NumericInput:
    case ErrorCode::DegenerateVariance:
    case ErrorCode::DegenerateRanking:
    case ErrorCode::DegenerateDiagnostic:
    case ErrorCode::Numerical:
      return 3;
    default:
      return 2;
  }
}

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Usage: return "usage error";
    case ErrorCode::Parse: return "parse error";
    case ErrorCode::Validation: return "validation error";
    case ErrorCode::InsufficientData: return "insufficient-data error";
    case ErrorCode::DegenerateColumn: return "degenerate-column error";
    case ErrorCode::InvalidProbability: return "invalid-probability error";
    case ErrorCode::Dimension: return "dimension error";
    case ErrorCode::NumericInput: return "numeric-input error";
    case ErrorCode::DegenerateVariance: return "degenerate-variance error";
    case ErrorCode::DegenerateRanking: return "degenerate-ranking error";
    case ErrorCode::DegenerateDiagnostic: return "degenerate-diagnostic error";
    case ErrorCode::Label: return "label error";
    case ErrorCode::Sampling: return "sampling error";
    case ErrorCode::Stratification: return "stratification error";
    case ErrorCode::Class: return "class error";
    case ErrorCode::Fold: return "fold error";
    case ErrorCode::Spec: return "spec error";
    case ErrorCode::Io: return "io error";
    case ErrorCode::Numerical: return "numerical failure";
  }
  return "error";
}

}  // namespace dominet
