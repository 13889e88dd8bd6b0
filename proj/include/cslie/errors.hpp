#pragma once

#include <stdexcept>
#include <string>

namespace cslie {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: wrong dimensions, malformed files, invalid configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A numerical operation could not produce a meaningful result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a map (logarithm at pi, atan2 at origin).
class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonFiniteError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Normal-equations matrix not positive definite.
class SingularSystemError : public NumericalError {
 public:
  SingularSystemError(const std::string& what, long pivot_index,
                      double pivot_value)
      : NumericalError(what), pivot_index_(pivot_index), pivot_value_(pivot_value) {}

  long pivot_index() const { return pivot_index_; }
  double pivot_value() const { return pivot_value_; }

 private:
  long pivot_index_;
  double pivot_value_;
};

}  // namespace cslie
