#pragma once

#include <stdexcept>
#include <string>

namespace spmu {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the operation's domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A set became empty (e.g. after exclusion or deletion).
class EmptySetError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Non-finite function value during numerical evaluation.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Generation requested for a class with no usable set elements.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace spmu
