#pragma once

#include <stdexcept>
#include <string>

namespace rpls {

/// Malformed input: bad CSV cells, invalid configs, violated preconditions.
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine could not produce a usable answer.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Logistic MLE does not exist (complete or quasi-complete separation).
class SeparationError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

/// Information or Hessian matrix is not positive definite.
class SingularMatrixError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

/// No candidate passes the selection threshold; the caller may lower it.
class ThresholdError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace rpls
