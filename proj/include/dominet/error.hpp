#pragma once

#include <stdexcept>
#include <string>

namespace dominet {

enum class ErrorCode {
  Usage,
  Parse,
  Validation,
  InsufficientData,
  DegenerateColumn,
  InvalidProbability,
  Dimension,
  NumericInput,
  DegenerateVariance,
  DegenerateRanking,
  DegenerateDiagnostic,
  Label,
  Sampling,
  Stratification,
  Class,
  Fold,
  Spec,
  Io,
  Numerical,
};

/// Process exit code for an error: 1 usage, 2 data validation, 3 numerical.
int exit_code_for(ErrorCode code);
const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dominet
