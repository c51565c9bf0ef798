#pragma once

#include <stdexcept>

namespace cuspgeo {

/// Point outside the validity radius of the model metric.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Input violates an operation's precondition (degenerate critical point, bad direction, ...).
struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Integration or root finding broke down.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cuspgeo
