#ifndef ESTKER_ERRORS_HPP
#define ESTKER_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace estker {

// Bad input: malformed files, violated structural preconditions.
// The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numeric procedure could not meet its contract (singular system,
// integrator breakdown, quadrature stagnation).  CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConstantCoefficients : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DichotomyViolation : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class OrderOutOfRange : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DegenerateGreen : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class OnDiagonal : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class GapTooSmall : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SymbolZeroOnAxis : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& message, std::size_t position)
      : ValidationError(message + " (at position " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class IntegrationFailure : public NumericError {
 public:
  using NumericError::NumericError;
};

class QuadratureFailure : public NumericError {
 public:
  using NumericError::NumericError;
};

class SingularWronskian : public NumericError {
 public:
  using NumericError::NumericError;
};

class RankDeficientMatching : public NumericError {
 public:
  using NumericError::NumericError;
};

class SingularMatchingSystem : public NumericError {
 public:
  using NumericError::NumericError;
};

class IllConditioned : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace estker

#endif  // ESTKER_ERRORS_HPP
