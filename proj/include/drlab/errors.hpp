#pragma once

#include <stdexcept>
#include <string>

namespace drlab {

// Invalid argument or violated precondition (CLI exit code 2).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Evaluation point outside a generating function's radius of convergence.
class DomainError : public ArgumentError {
 public:
  DomainError(const std::string& what, double radius)
      : ArgumentError(what), radius_(radius) {}
  double radius() const { return radius_; }

 private:
  double radius_;
};

// A regime-specific constant was requested for a trajectory of another regime.
class RegimeMismatchError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Step budgets, grid sizes, node budgets and support caps (CLI exit code 3).
class ResourceLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested tolerance below what the active arithmetic resolves (exit code 4).
class PrecisionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bisection endpoints classify identically.
class BracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A trajectory is too short for the requested estimator.
class InsufficientLengthError : public std::runtime_error {
 public:
  InsufficientLengthError(const std::string& what, std::size_t min_length)
      : std::runtime_error(what), min_length_(min_length) {}
  std::size_t min_length() const { return min_length_; }

 private:
  std::size_t min_length_;
};

}  // namespace drlab
