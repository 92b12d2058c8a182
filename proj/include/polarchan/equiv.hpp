#pragma once

// Checks for the two ways distinct unitaries can explain the same data:
// a global phase (U = mu V, identical channels) and, for a single input
// state with eigenbasis V, the diagonal-phase class U1 = U2 V D V*.

#include <cmath>
#include <complex>

#include "polarchan/matkit.hpp"

namespace polarchan {

struct PhaseAlignment {
  Complex mu{1.0, 0.0};
  double distance = 0.0;
  /// |tr(V* U)| was too small to define mu; mu = 1 was used.
  bool degenerate = false;
};

inline constexpr double kDegenerateTrace = 1e-14;

/// Unimodular mu minimizing ||U - mu V||_F, i.e. tr(V* U)/|tr(V* U)|.
inline PhaseAlignment global_phase_align(const ComplexMatrix& u,
                                         const ComplexMatrix& v) {
  require_square(u, "global_phase_align");
  require_same_shape(u, v, "global_phase_align");
  const Complex t = (v.adjoint() * u).trace();
  PhaseAlignment out;
  if (std::abs(t) < kDegenerateTrace) {
    out.degenerate = true;
  } else {
    out.mu = t / std::abs(t);
  }
  out.distance = (u - out.mu * v).norm();
  return out;
}

struct DiagonalRelation {
  ComplexVector d_hat;
  double offdiag_mass = 0.0;
};

/// Delta = V* U2* U1 V. U1 and U2 are related by a diagonal phase matrix in
/// the basis V exactly when Delta is diagonal with unimodular entries.
inline DiagonalRelation relation_matrix(const ComplexMatrix& u1,
                                        const ComplexMatrix& u2,
                                        const ComplexMatrix& v) {
  require_square(u1, "relation_matrix");
  require_same_shape(u1, u2, "relation_matrix");
  require_same_shape(u1, v, "relation_matrix");
  ComplexMatrix delta = v.adjoint() * u2.adjoint() * u1 * v;
  DiagonalRelation out;
  out.d_hat = delta.diagonal();
  delta.diagonal().setZero();
  out.offdiag_mass = delta.norm();
  return out;
}

inline bool is_equiv_under(const ComplexMatrix& u1, const ComplexMatrix& u2,
                           const ComplexMatrix& v, double tol) {
  const DiagonalRelation rel = relation_matrix(u1, u2, v);
  if (!(rel.offdiag_mass <= tol)) return false;
  for (Eigen::Index k = 0; k < rel.d_hat.size(); ++k) {
    if (std::abs(std::abs(rel.d_hat(k)) - 1.0) > tol) return false;
  }
  return true;
}

enum class Pivot { entry11, max_modulus };

inline constexpr double kMinPivot = 1e-12;

/// ||U/p - U'/p'||_F with p, p' the entries of U and U' at the pivot
/// position. max_modulus takes the position of the largest |U_ij|.
inline double normalized_diff(const ComplexMatrix& u,
                              const ComplexMatrix& u_prime,
                              Pivot pivot = Pivot::entry11) {
  require_square(u, "normalized_diff");
  require_same_shape(u, u_prime, "normalized_diff");
  Eigen::Index pi = 0;
  Eigen::Index pj = 0;
  if (pivot == Pivot::max_modulus) {
    u.cwiseAbs().maxCoeff(&pi, &pj);
  }
  const Complex p = u(pi, pj);
  const Complex pp = u_prime(pi, pj);
  if (std::abs(p) <= kMinPivot || std::abs(pp) <= kMinPivot) {
    throw PreconditionError(
        "normalized_diff: pivot entry too small; use the max-modulus pivot");
  }
  return (u / p - u_prime / pp).norm();
}

} // namespace polarchan
