#pragma once

#include <stdexcept>
#include <string>

namespace polarchan {

/// Shapes of two operands disagree, or a matrix is not square.
class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// An input violates a structural precondition (unitary, Hermitian,
/// positive definite, finite, distinct indices...).
class PreconditionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// The input state for reconstruction has a (numerically) repeated eigenvalue.
class DegenerateStateError : public PreconditionError {
public:
  using PreconditionError::PreconditionError;
};

/// An underlying dense factorization did not converge.
class FactorizationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Reconstruction produced data inconsistent with a unitary channel.
class ReconstructionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace polarchan
