#pragma once

// Dense complex linear algebra for the unitary group: norms, the real
// trace inner product, Hermitian/skew-Hermitian splitting, tangent-space
// projection, Hermitian eigendecomposition with a fixed phase convention,
// polar decomposition and seeded random generators.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>

#include "polarchan/errors.hpp"

namespace polarchan {

using Complex = std::complex<double>;
using ComplexMatrix =
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexVector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
using RealVector = Eigen::VectorXd;

/// Relative tolerance applied when validating caller-supplied unitary or
/// Hermitian matrices.
inline constexpr double kInputTol = 1e-10;
/// Absolute tolerance guaranteed by constructors (eigenvectors, polar
/// factors, random unitaries).
inline constexpr double kConstructTol = 1e-12;

/// Eigenvalues in descending order with column-paired eigenvectors. In each
/// eigenvector the entry of largest modulus is real and positive.
struct HermitianEigen {
  RealVector eigenvalues;
  ComplexMatrix eigenvectors;
};

/// A = unitary * psd.
struct PolarFactors {
  ComplexMatrix unitary;
  ComplexMatrix psd;
};

namespace detail {

inline std::string shape_string(const ComplexMatrix& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

} // namespace detail

inline void require_square(const ComplexMatrix& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw DimensionError(std::string(what) + ": expected a non-empty square "
                         "matrix, got " + detail::shape_string(a));
  }
}

inline void require_same_shape(const ComplexMatrix& a, const ComplexMatrix& b,
                               const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch " +
                         detail::shape_string(a) + " vs " +
                         detail::shape_string(b));
  }
}

inline bool all_finite(const ComplexMatrix& a) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Complex z = a.data()[i];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

inline void require_finite(const ComplexMatrix& a, const char* what) {
  if (!all_finite(a)) {
    throw PreconditionError(std::string(what) + ": non-finite entry");
  }
}

inline ComplexMatrix identity(Eigen::Index n) {
  return ComplexMatrix::Identity(n, n);
}

inline double frob_norm(const ComplexMatrix& a) { return a.norm(); }

/// Re(tr(A* B)).
inline double real_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_shape(a, b, "real_inner");
  return (a.conjugate().cwiseProduct(b)).sum().real();
}

inline ComplexMatrix herm_part(const ComplexMatrix& a) {
  require_square(a, "herm_part");
  return (a + a.adjoint()) * 0.5;
}

inline ComplexMatrix skew_part(const ComplexMatrix& a) {
  require_square(a, "skew_part");
  return (a - a.adjoint()) * 0.5;
}

/// ||X* X - I||_F.
inline double unitarity_defect(const ComplexMatrix& x) {
  require_square(x, "unitarity_defect");
  return (x.adjoint() * x - identity(x.rows())).norm();
}

inline bool is_unitary(const ComplexMatrix& x, double tol = kInputTol) {
  return x.rows() == x.cols() && x.rows() >= 1 &&
         unitarity_defect(x) <= tol * std::sqrt(static_cast<double>(x.rows()));
}

inline void require_unitary(const ComplexMatrix& x, const char* what,
                            double tol = kInputTol) {
  require_square(x, what);
  if (!is_unitary(x, tol)) {
    throw PreconditionError(std::string(what) + ": matrix is not unitary "
                            "(defect " + std::to_string(unitarity_defect(x)) +
                            ")");
  }
}

/// ||A - A*||_F <= tol * ||A||_F.
inline bool is_hermitian(const ComplexMatrix& a, double tol = kInputTol) {
  if (a.rows() != a.cols()) return false;
  return (a - a.adjoint()).norm() <= tol * a.norm();
}

/// Projection of H onto the tangent space of the unitary group at X:
/// X * skew(X* H).
inline ComplexMatrix tangent_project(const ComplexMatrix& x,
                                     const ComplexMatrix& h) {
  require_unitary(x, "tangent_project");
  require_same_shape(x, h, "tangent_project");
  return x * skew_part(x.adjoint() * h);
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized
/// before factorization.
inline HermitianEigen hermitian_eig(const ComplexMatrix& a) {
  require_square(a, "hermitian_eig");
  require_finite(a, "hermitian_eig");
  if (!is_hermitian(a)) {
    throw PreconditionError("hermitian_eig: input is not Hermitian");
  }
  const Eigen::Index n = a.rows();
  const Eigen::MatrixXcd sym = herm_part(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw FactorizationError("hermitian_eig: eigensolver did not converge");
  }

  HermitianEigen out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  // Eigen returns ascending order.
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = n - 1 - k;
    out.eigenvalues(k) = solver.eigenvalues()(src);
    ComplexVector col = solver.eigenvectors().col(src);
    Eigen::Index pivot = 0;
    double best = std::abs(col(0));
    for (Eigen::Index i = 1; i < n; ++i) {
      const double m = std::abs(col(i));
      if (m > best) {
        best = m;
        pivot = i;
      }
    }
    const Complex phase = std::conj(col(pivot)) / best;
    col *= phase;
    col(pivot) = Complex(std::abs(col(pivot)), 0.0);
    out.eigenvectors.col(k) = col;
  }
  return out;
}

namespace detail {

struct PolarSvd {
  PolarFactors factors;
  RealVector singular_values; // descending
};

inline PolarSvd polar_svd(const ComplexMatrix& a) {
  require_square(a, "poldec");
  require_finite(a, "poldec");
  const Eigen::MatrixXcd m = a;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeFullU |
                                                Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) {
    throw FactorizationError("poldec: singular value factorization failed");
  }
  const Eigen::MatrixXcd& w = svd.matrixU();
  const Eigen::MatrixXcd& y = svd.matrixV();
  PolarSvd out;
  out.singular_values = svd.singularValues();
  out.factors.unitary = w * y.adjoint();
  const ComplexMatrix p =
      y * out.singular_values.cast<Complex>().asDiagonal() * y.adjoint();
  out.factors.psd = (p + p.adjoint()) * 0.5;
  if (!all_finite(out.factors.unitary) || !all_finite(out.factors.psd)) {
    throw FactorizationError("poldec: non-finite factors");
  }
  return out;
}

} // namespace detail

/// Polar decomposition A = U P through the singular value factorization
/// A = W S Y*: U = W Y*, P = Y S Y*. For singular A the unitary factor is
/// one valid completion.
inline PolarFactors poldec(const ComplexMatrix& a) {
  return detail::polar_svd(a).factors;
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Matrix of i.i.d. standard complex Gaussian entries (unit variance per
/// real and imaginary part), drawn row by row.
inline ComplexMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols,
                                      std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexMatrix g(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      g(i, j) = Complex(re, im);
    }
  }
  return g;
}

/// Unitary polar factor of a seeded complex Gaussian matrix.
inline ComplexMatrix random_unitary(Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("random_unitary: n must be >= 1");
  std::mt19937_64 rng(seed);
  return poldec(complex_gaussian(n, n, rng)).unitary;
}

inline constexpr double kDensityShift = 1e-3;

/// Full-rank density matrix (G G* + eps I) / tr(.) from a seeded complex
/// Gaussian G.
inline ComplexMatrix random_density(Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("random_density: n must be >= 1");
  std::mt19937_64 rng(seed);
  const ComplexMatrix g = complex_gaussian(n, n, rng);
  ComplexMatrix rho = g * g.adjoint() + kDensityShift * identity(n);
  rho = herm_part(rho);
  rho /= rho.trace().real();
  return rho;
}

/// Random Hermitian matrix (G + G*)/2, used for tests and probes.
inline ComplexMatrix random_hermitian(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return herm_part(complex_gaussian(n, n, rng));
}

} // namespace polarchan
