#pragma once

#include <stdexcept>
#include <string>

namespace qpme {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or shape mismatch on a public entry point.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A quotient recovery hit a (near) zero denominator.
class SingularDenominatorError : public Error {
 public:
  using Error::Error;
};

/// An admissibility constraint (1 - lap(phi) >= 0, sigma > 0) failed at a sample.
class ConstraintViolationError : public Error {
 public:
  using Error::Error;
};

/// A loss term, gradient or state became NaN/Inf.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// The explicit finite-difference step would violate its stability bound.
class StabilityError : public Error {
 public:
  StabilityError(const std::string& what, double suggested_dt)
      : Error(what), suggested_dt_(suggested_dt) {}
  double suggested_dt() const { return suggested_dt_; }

 private:
  double suggested_dt_;
};

/// Reading or writing an artifact failed (missing file, corruption, bad config).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace qpme
