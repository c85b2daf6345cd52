#pragma once

#include <stdexcept>
#include <string>

namespace qmpe {

// Shape mismatch between operands (non-square input, non-square vector length, ...).
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain (omega = 0, negative time, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Input object fails its invariants (state not unit trace, bad spec, ...).
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Operation not defined for this configuration (d = 2 where d >= 3 is needed, ...).
struct NotApplicableError : std::logic_error {
  using std::logic_error::logic_error;
};

// Iterative kernel failed its residual contract.
struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& what, double worst_residual)
      : std::runtime_error(what + " (worst residual " + std::to_string(worst_residual) + ")"),
        worst_residual(worst_residual) {}
  double worst_residual;
};

// Left/right eigenvector pairing failed.
struct PairingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qmpe
