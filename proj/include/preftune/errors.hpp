#pragma once

#include <stdexcept>
#include <string>

namespace preftune {

// Bad argument values or shapes.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A parameter vector outside its declared box.
class BoundsError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

// Recorded preferences admit no best-so-far sample.
class InconsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Surrogate fitting failed (solver diagnostics in the message).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Objective returned a non-finite value during minimization.
class OptimizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation not allowed in the current session phase.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Physical model evaluated outside its domain (e.g. T <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class EquilibriumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LinearizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// MPC problem could not be solved (infeasible QP).
class MpcError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace preftune
