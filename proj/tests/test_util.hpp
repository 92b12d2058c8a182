#pragma once

#include <initializer_list>
#include <random>

#include "polarchan/matkit.hpp"

namespace polarchan::test {

/// Row-major n x n matrix from a flat list.
inline ComplexMatrix mat(Eigen::Index n, std::initializer_list<Complex> rows) {
  ComplexMatrix a(n, n);
  auto it = rows.begin();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = *it++;
  }
  return a;
}

inline ComplexMatrix random_matrix(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed * 2654435761ULL + 17);
  return complex_gaussian(n, n, rng);
}

/// Unit-norm random skew-Hermitian matrix.
inline ComplexMatrix random_skew(Eigen::Index n, std::uint64_t seed) {
  ComplexMatrix k = skew_part(random_matrix(n, seed));
  return k / k.norm();
}

/// exp(A) for skew-Hermitian A through the Hermitian eigendecomposition of
/// -iA.
inline ComplexMatrix expm_skew(const ComplexMatrix& a) {
  const Complex i1(0.0, 1.0);
  const Eigen::MatrixXcd h = -i1 * a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  ComplexVector phases(a.rows());
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    phases(k) = std::exp(i1 * es.eigenvalues()(k));
  }
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

} // namespace polarchan::test
