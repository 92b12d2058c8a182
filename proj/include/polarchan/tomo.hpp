#pragma once

// Simulated measurement layer and the reconstruction pipeline that
// recovers a hidden unitary channel (up to global phase) from
// n^2 + n + 2(n-1) expectation-value queries.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "polarchan/matkit.hpp"
#include "polarchan/search.hpp"

namespace polarchan {

/// Black-box unitary channel rho -> U rho U*. The channel is a linear map on
/// Hermitian matrices, so non-positive "probe states" are accepted.
/// Every call to expectation() is one measurement and bumps the counter.
class ChannelOracle {
public:
  explicit ChannelOracle(ComplexMatrix hidden) : hidden_(std::move(hidden)) {
    require_unitary(hidden_, "ChannelOracle");
  }
  ChannelOracle(const ChannelOracle&) = delete;
  ChannelOracle& operator=(const ChannelOracle&) = delete;

  Eigen::Index dim() const { return hidden_.rows(); }

  /// Direct channel action; not a measurement.
  ComplexMatrix apply(const ComplexMatrix& state) const {
    require_same_shape(hidden_, state, "ChannelOracle::apply");
    return hidden_ * state * hidden_.adjoint();
  }

  /// Re tr(Phi(state) observable).
  double expectation(const ComplexMatrix& state,
                     const ComplexMatrix& observable) const {
    require_same_shape(hidden_, observable, "ChannelOracle::expectation");
    const ComplexMatrix out = apply(state);
    queries_.fetch_add(1, std::memory_order_relaxed);
    // tr(A B) = sum_ij A_ij B_ji
    return out.cwiseProduct(observable.transpose()).sum().real();
  }

  std::uint64_t queries() const {
    return queries_.load(std::memory_order_relaxed);
  }

  /// For test oracles only; reconstruction never looks at it.
  const ComplexMatrix& hidden_unitary() const { return hidden_; }

private:
  ComplexMatrix hidden_;
  mutable std::atomic<std::uint64_t> queries_{0};
};

enum class ObservableKind { e_plus, e_minus, probe };

struct Observable {
  ComplexMatrix matrix;
  ObservableKind kind = ObservableKind::probe;
  Eigen::Index i = 0;
  Eigen::Index j = 0;
};

/// Tomography basis, n^2 + n observables. For each i <= j in row-major
/// order: (E_ij)+ = (e_i e_j^T + e_j e_i^T)/2 followed by
/// (E_ij)- = (e_i e_j^T - e_j e_i^T)/2i. The diagonal (E_ii)- is the zero
/// matrix; it is kept so the basis has the standard n^2 + n members.
inline std::vector<Observable> basis_observables(Eigen::Index n) {
  if (n < 1) throw PreconditionError("basis_observables: n must be >= 1");
  const Complex two_i(0.0, 2.0);
  std::vector<Observable> out;
  out.reserve(static_cast<std::size_t>(n * n + n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      ComplexMatrix plus = ComplexMatrix::Zero(n, n);
      plus(i, j) += 0.5;
      plus(j, i) += 0.5;
      out.push_back({std::move(plus), ObservableKind::e_plus, i, j});
      ComplexMatrix minus = ComplexMatrix::Zero(n, n);
      if (i != j) {
        minus(i, j) = 1.0 / two_i;
        minus(j, i) = -1.0 / two_i;
      }
      out.push_back({std::move(minus), ObservableKind::e_minus, i, j});
    }
  }
  return out;
}

inline double measure(const ChannelOracle& oracle,
                      const ComplexMatrix& input_state,
                      const Observable& obs) {
  return oracle.expectation(input_state, obs.matrix);
}

/// Entrywise reconstruction of Phi(input_state): tr(rho (E_ij)+) = Re rho_ij
/// and tr(rho (E_ij)-) = -Im rho_ij. Uses exactly n^2 + n measurements.
inline ComplexMatrix state_tomography(const ChannelOracle& oracle,
                                      const ComplexMatrix& input_state) {
  const Eigen::Index n = oracle.dim();
  require_same_shape(oracle.hidden_unitary(), input_state, "state_tomography");
  ComplexMatrix out = ComplexMatrix::Zero(n, n);
  for (const Observable& obs : basis_observables(n)) {
    const double m = measure(oracle, input_state, obs);
    if (obs.kind == ObservableKind::e_plus) {
      out(obs.i, obs.j) += m;
      if (obs.i != obs.j) out(obs.j, obs.i) += m;
    } else if (obs.i != obs.j) {
      out(obs.i, obs.j) += Complex(0.0, -m);
      out(obs.j, obs.i) += Complex(0.0, m);
    }
  }
  return out;
}

struct ProbePair {
  ComplexMatrix plus;
  ComplexMatrix minus;
};

namespace detail {

inline ProbePair probe_states_unchecked(const ComplexMatrix& v,
                                        Eigen::Index p, Eigen::Index q,
                                        Eigen::Index r) {
  const ComplexVector vp = v.col(p);
  const ComplexVector vq = v.col(q);
  const ComplexVector vr = v.col(r);
  const ComplexMatrix base = vr * vr.adjoint();
  const ComplexMatrix pq = vp * vq.adjoint();
  const ComplexMatrix qp = vq * vp.adjoint();
  ProbePair out;
  out.plus = base + 0.5 * (pq + qp);
  out.minus = base + (pq - qp) / Complex(0.0, 2.0);
  return out;
}

inline void require_index(Eigen::Index k, Eigen::Index n, const char* what) {
  if (k < 0 || k >= n) {
    throw PreconditionError(std::string(what) + ": index out of range");
  }
}

} // namespace detail

/// (rho_pqr)+ = v_r v_r* + (v_p v_q* + v_q v_p*)/2 and
/// (rho_pqr)- = v_r v_r* + (v_p v_q* - v_q v_p*)/2i for distinct columns
/// p, q, r of V (zero-based). Both have unit trace; neither is positive.
inline ProbePair probe_states(const ComplexMatrix& v, Eigen::Index p,
                              Eigen::Index q, Eigen::Index r) {
  require_square(v, "probe_states");
  for (Eigen::Index k : {p, q, r}) detail::require_index(k, v.rows(), "probe_states");
  if (p == q || p == r || q == r) {
    throw PreconditionError("probe_states: indices p, q, r must be distinct");
  }
  return detail::probe_states_unchecked(v, p, q, r);
}

inline constexpr double kUnimodularTol = 1e-3;

/// Recovers alpha = d_p conj(d_q) for the hidden channel
/// U = u0 V diag(d) V* with two measurements. The probe observable is the
/// projector onto w = u0 (v_p + v_q)/sqrt(2), which gives
///   w* Phi(rho+) w = c + Re(alpha)/2,   w* Phi(rho-) w = c + Im(alpha)/2
/// where c = |<(v_p + v_q)/sqrt(2), v_r>|^2 is the contribution of the
/// v_r v_r* term. The auxiliary index r is the smallest index outside
/// {p, q}; for n = 2 none exists and r = p is used (c = 1/2).
inline Complex extract_phase_product(const ChannelOracle& oracle,
                                     const ComplexMatrix& u0,
                                     const ComplexMatrix& v, Eigen::Index p,
                                     Eigen::Index q) {
  const Eigen::Index n = oracle.dim();
  require_same_shape(oracle.hidden_unitary(), u0, "extract_phase_product");
  require_same_shape(u0, v, "extract_phase_product");
  require_unitary(u0, "extract_phase_product", kIterateTol);
  detail::require_index(p, n, "extract_phase_product");
  detail::require_index(q, n, "extract_phase_product");
  if (p == q) {
    throw PreconditionError("extract_phase_product: p and q must differ");
  }
  Eigen::Index r = 0;
  while (r < n && (r == p || r == q)) ++r;
  const bool collides = (r == n);
  if (collides) r = p;
  const double c = collides ? 0.5 : 0.0;

  const ProbePair probes = detail::probe_states_unchecked(v, p, q, r);
  const ComplexVector w = u0 * (v.col(p) + v.col(q)) / std::sqrt(2.0);
  Observable proj{w * w.adjoint(), ObservableKind::probe, p, q};
  const double m_plus = measure(oracle, probes.plus, proj);
  const double m_minus = measure(oracle, probes.minus, proj);
  const Complex alpha(2.0 * (m_plus - c), 2.0 * (m_minus - c));
  if (std::abs(std::abs(alpha) - 1.0) > kUnimodularTol) {
    throw ReconstructionError(
        "extract_phase_product: |alpha| = " + std::to_string(std::abs(alpha)) +
        " is not unimodular; u0 is not consistent with the channel");
  }
  return alpha;
}

/// ||Phi(rho) - U rho U*||_F tolerance on the verification states.
inline constexpr double kVerifyTol = 1e-8;
/// Minimum adjacent eigenvalue gap relative to the spectral spread.
inline constexpr double kDegeneracyTol = 1e-8;

/// Objective tolerance used by the reconstruction pipeline unless the caller
/// chooses one. The off-class error left in u0 scales like sqrt(g) over the
/// smallest eigengap of rho0, so the solve runs to near round-off instead of
/// stopping at the plain-solve default.
inline constexpr double kReconstructTol = 1e-28;

inline SolverConfig reconstruction_defaults() {
  SolverConfig c;
  c.tol = kReconstructTol;
  return c;
}

struct ReconstructOptions {
  int test_states = 5;
  std::uint64_t test_seed = 0x5eed;
};

struct ReconstructionReport {
  ComplexMatrix u0;
  ComplexMatrix v;
  ComplexVector d;
  ComplexMatrix u_recovered;
  std::uint64_t budget_used = 0;
  double eigengap = 0.0;
  double residual_on_tests = 0.0;

  SolveResult solve;
  bool verified = false;
};

/// Smallest gap between consecutive eigenvalues divided by the spectral
/// spread; 1 for n = 1 and 0 for a multiple of the identity.
inline double relative_eigengap(const RealVector& descending) {
  const Eigen::Index n = descending.size();
  if (n < 2) return 1.0;
  const double spread = descending(0) - descending(n - 1);
  if (!(spread > 0.0)) return 0.0;
  double gap = spread;
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    gap = std::min(gap, descending(k) - descending(k + 1));
  }
  return gap / spread;
}

/// Random non-degenerate density matrix with a geometrically spread
/// spectrum: log-eigenvalues are -k ln 2 plus a jitter in (-ln2/4, ln2/4),
/// so consecutive eigenvalues differ by a factor of at least sqrt(2). The
/// eigenbasis is a seeded random unitary.
inline ComplexMatrix random_nondegenerate_state(Eigen::Index n,
                                               std::uint64_t seed) {
  if (n < 1) {
    throw PreconditionError("random_nondegenerate_state: n must be >= 1");
  }
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> jitter(-0.25, 0.25);
  const double ln2 = std::log(2.0);
  RealVector lambda(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    lambda(k) = std::exp(-ln2 * (static_cast<double>(k) + jitter(rng)));
  }
  lambda /= lambda.sum();
  const ComplexMatrix q = random_unitary(n, seed);
  ComplexMatrix rho = q * lambda.cast<Complex>().asDiagonal() * q.adjoint();
  return herm_part(rho);
}

/// Full pipeline. Step 1: tomography of sigma0 = Phi(rho0) and a solve on
/// (rho0, sigma0) giving u0, which equals U V D V* for a unimodular
/// diagonal D. Steps 2-3: the star schedule (0, q), q = 1..n-1, yields
/// alpha_q = d_0 conj(d_q). Step 4: d_0 = 1, d_q = conj(alpha_q) and
/// U ~ u0 V diag(d) V*. The result is checked on fresh random states with
/// the uncounted channel evaluator.
inline ReconstructionReport reconstruct(const ChannelOracle& oracle,
                                        const ComplexMatrix& rho0,
                                        const SolverConfig& config =
                                            reconstruction_defaults(),
                                        const ReconstructOptions& opts = {}) {
  const Eigen::Index n = oracle.dim();
  require_same_shape(oracle.hidden_unitary(), rho0, "reconstruct");
  config.validate();

  const HermitianEigen eig = hermitian_eig(rho0);
  ReconstructionReport rep;
  rep.v = eig.eigenvectors;
  rep.eigengap = relative_eigengap(eig.eigenvalues);
  if (!(eig.eigenvalues(n - 1) > 0.0)) {
    throw PreconditionError("reconstruct: rho0 is not positive definite");
  }
  if (n > 1 && !(rep.eigengap > kDegeneracyTol)) {
    throw DegenerateStateError(
        "reconstruct: degenerate state rho0 (relative eigengap " +
        std::to_string(rep.eigengap) + ")");
  }

  const std::uint64_t start = oracle.queries();
  const ComplexMatrix sigma0 = herm_part(state_tomography(oracle, rho0));
  rep.solve = solve(ChannelInstance(rho0, sigma0), config);
  rep.u0 = rep.solve.u_hat;

  rep.d = ComplexVector::Ones(n);
  for (Eigen::Index q = 1; q < n; ++q) {
    rep.d(q) = std::conj(extract_phase_product(oracle, rep.u0, rep.v, 0, q));
  }
  rep.budget_used = oracle.queries() - start;
  rep.u_recovered = rep.u0 * rep.v * rep.d.asDiagonal() * rep.v.adjoint();

  rep.residual_on_tests = 0.0;
  for (int t = 0; t < opts.test_states; ++t) {
    const ComplexMatrix rho = random_density(n, opts.test_seed + t);
    const double res =
        (oracle.apply(rho) - rep.u_recovered * rho * rep.u_recovered.adjoint())
            .norm();
    rep.residual_on_tests = std::max(rep.residual_on_tests, res);
  }
  rep.verified = rep.residual_on_tests < kVerifyTol;
  return rep;
}

} // namespace polarchan
