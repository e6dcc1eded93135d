#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace blmm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input table is missing a required column or is otherwise malformed.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented precondition (bad level label, rt <= 0, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Fewer than two distinct subjects or items.
class DegenerateGroupingError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefiniteError : public Error {
 public:
  NotPositiveDefiniteError(std::size_t leading_minor, double pivot)
      : Error("matrix is not positive definite: leading minor " +
              std::to_string(leading_minor) + " has pivot " +
              std::to_string(pivot)),
        leading_minor_(leading_minor) {}

  /// 1-based order of the first leading minor that failed.
  std::size_t leading_minor() const noexcept { return leading_minor_; }

 private:
  std::size_t leading_minor_;
};

/// Cholesky factor whose rows are not unit length.
class InvalidFactorError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Gradient evaluation produced a non-finite coordinate.
class NonFiniteGradientError : public Error {
 public:
  explicit NonFiniteGradientError(std::size_t index)
      : Error("non-finite gradient at coordinate " + std::to_string(index)),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class InitializationError : public Error {
 public:
  using Error::Error;
};

class DiagnosticError : public Error {
 public:
  using Error::Error;
};

}  // namespace blmm
