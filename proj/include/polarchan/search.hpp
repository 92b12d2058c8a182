#pragma once

// Identification of a unitary channel from input/output state pairs by
// the polar-decomposition fixed-point iteration
//
//     U_{s+1} = unitary factor of  sum_i 2 sigma_i U_s rho_i
//
// which never increases g(U) = 1/2 sum_i ||sigma_i - U rho_i U*||_F^2 on a
// single pair and whose fixed points are critical points of g on the
// unitary group.

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "polarchan/matkit.hpp"

namespace polarchan {

struct StatePair {
  ComplexMatrix rho;
  ComplexMatrix sigma;
};

/// Non-empty list of (rho, sigma) pairs of Hermitian positive definite
/// matrices of a common dimension.
class ChannelInstance {
public:
  explicit ChannelInstance(std::vector<StatePair> pairs)
      : pairs_(std::move(pairs)) {
    validate();
  }
  ChannelInstance(ComplexMatrix rho, ComplexMatrix sigma)
      : ChannelInstance(std::vector<StatePair>{{std::move(rho),
                                                std::move(sigma)}}) {}

  const std::vector<StatePair>& pairs() const { return pairs_; }
  Eigen::Index dim() const { return pairs_.front().rho.rows(); }
  std::size_t size() const { return pairs_.size(); }

  /// sigma_i = U rho_i U* for every rho_i.
  static ChannelInstance exact(const ComplexMatrix& u,
                               const std::vector<ComplexMatrix>& inputs) {
    std::vector<StatePair> pairs;
    pairs.reserve(inputs.size());
    for (const auto& rho : inputs) {
      require_same_shape(u, rho, "ChannelInstance::exact");
      pairs.push_back({rho, herm_part(u * rho * u.adjoint())});
    }
    return ChannelInstance(std::move(pairs));
  }

private:
  static void require_positive_definite(const ComplexMatrix& a,
                                        const std::string& what) {
    require_square(a, what.c_str());
    require_finite(a, what.c_str());
    if (!is_hermitian(a)) {
      throw PreconditionError(what + " is not Hermitian");
    }
    const Eigen::MatrixXcd sym = herm_part(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(sym,
                                                       Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
      throw FactorizationError(what + ": eigensolver did not converge");
    }
    if (!(es.eigenvalues()(0) > 0.0)) {
      throw PreconditionError(what + " is not positive definite");
    }
  }

  void validate() const {
    if (pairs_.empty()) {
      throw PreconditionError("ChannelInstance: no state pairs");
    }
    const Eigen::Index n = pairs_.front().rho.rows();
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      const std::string tag = "pair " + std::to_string(i);
      require_positive_definite(pairs_[i].rho, tag + " rho");
      require_positive_definite(pairs_[i].sigma, tag + " sigma");
      if (pairs_[i].rho.rows() != n || pairs_[i].sigma.rows() != n) {
        throw DimensionError("ChannelInstance: " + tag +
                             " has a different dimension");
      }
    }
  }

  std::vector<StatePair> pairs_;
};

enum class InitKind { identity, random };

struct SolverConfig {
  int max_iters = 5000;
  double tol = 1e-24;
  double stall_tol = 1e-13;
  InitKind init = InitKind::identity;
  std::uint64_t init_seed = 0;

  void validate() const {
    if (max_iters < 1) throw PreconditionError("SolverConfig: max_iters < 1");
    if (!(tol > 0.0)) throw PreconditionError("SolverConfig: tol <= 0");
    if (!(stall_tol >= 0.0)) {
      throw PreconditionError("SolverConfig: stall_tol < 0");
    }
  }
};

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double step_norm = 0.0; // ||U_iter - U_{iter-1}||_F, 0 for the start point
  double residual = 0.0;  // ||skew(U* grad g(U))||_F
};

struct IterationTrace {
  std::vector<IterationRecord> records;
  /// Iterations where g rose by more than kMonotoneSlack.
  std::vector<int> monotonicity_violations;
  /// Iterations where the summed gradient was numerically singular and the
  /// polar factor is one of several completions.
  std::vector<int> singular_gradient_iters;
};

enum class SolveStatus { converged_tol, converged_stall, max_iters };

inline const char* to_string(SolveStatus s) {
  switch (s) {
  case SolveStatus::converged_tol: return "converged-tol";
  case SolveStatus::converged_stall: return "converged-stall";
  case SolveStatus::max_iters: return "max-iters";
  }
  return "unknown";
}

struct SolveResult {
  ComplexMatrix u_hat;
  IterationTrace trace;
  SolveStatus status = SolveStatus::max_iters;

  const IterationRecord& last() const { return trace.records.back(); }
  int iterations() const { return last().iter; }
};

inline constexpr double kMonotoneSlack = 1e-12;
/// Unitarity tolerance for iterates handed to objective/gradient.
inline constexpr double kIterateTol = 1e-8;

namespace detail {

inline void check_operands(const ComplexMatrix& u, const StatePair& pair,
                           const char* what) {
  require_square(u, what);
  require_same_shape(u, pair.rho, what);
  require_same_shape(u, pair.sigma, what);
}

} // namespace detail

/// 1/2 ||sigma - U rho U*||_F^2.
inline double objective(const ComplexMatrix& u, const StatePair& pair) {
  detail::check_operands(u, pair, "objective");
  require_unitary(u, "objective", kIterateTol);
  return 0.5 * (pair.sigma - u * pair.rho * u.adjoint()).squaredNorm();
}

/// 1/2 (||sigma||^2 + ||rho||^2 - 2 Re<sigma, U rho U*>); equal to
/// objective() on the unitary group.
inline double objective_expanded(const ComplexMatrix& u,
                                 const StatePair& pair) {
  detail::check_operands(u, pair, "objective_expanded");
  require_unitary(u, "objective_expanded", kIterateTol);
  return 0.5 * (pair.sigma.squaredNorm() + pair.rho.squaredNorm() -
                2.0 * real_inner(pair.sigma, u * pair.rho * u.adjoint()));
}

inline double objective(const ComplexMatrix& u, const ChannelInstance& inst) {
  double total = 0.0;
  for (const auto& p : inst.pairs()) total += objective(u, p);
  return total;
}

/// -grad g(U) = 2 sigma U rho.
inline ComplexMatrix neg_gradient(const ComplexMatrix& u,
                                  const StatePair& pair) {
  detail::check_operands(u, pair, "neg_gradient");
  return 2.0 * pair.sigma * u * pair.rho;
}

inline ComplexMatrix neg_gradient(const ComplexMatrix& u,
                                  const ChannelInstance& inst) {
  ComplexMatrix sum = ComplexMatrix::Zero(u.rows(), u.cols());
  for (const auto& p : inst.pairs()) sum += neg_gradient(u, p);
  return sum;
}

/// ||skew(U* grad g(U))||_F; zero exactly at first-order critical points.
inline double residual(const ComplexMatrix& u, const ChannelInstance& inst) {
  return skew_part(u.adjoint() * neg_gradient(u, inst)).norm();
}

namespace detail {

struct StepOutcome {
  ComplexMatrix next;
  bool singular = false;
};

inline StepOutcome step_impl(const ComplexMatrix& u,
                             const ChannelInstance& inst) {
  const PolarSvd ps = polar_svd(neg_gradient(u, inst));
  const RealVector& sv = ps.singular_values;
  const double floor = std::numeric_limits<double>::epsilon() *
                       static_cast<double>(sv.size()) * sv(0);
  return {ps.factors.unitary, !(sv(sv.size() - 1) > floor)};
}

} // namespace detail

/// One fixed-point update: unitary polar factor of sum_i 2 sigma_i U rho_i.
inline ComplexMatrix step(const ComplexMatrix& u, const ChannelInstance& inst) {
  require_unitary(u, "step", kIterateTol);
  if (u.rows() != inst.dim()) {
    throw DimensionError("step: iterate and instance dimensions differ");
  }
  return detail::step_impl(u, inst).next;
}

using IterationObserver = std::function<void(const IterationRecord&)>;

/// Iterates step() from the configured start until g < tol
/// (converged-tol), ||U_{s+1} - U_s||_F < stall_tol (converged-stall) or
/// max_iters updates (max-iters). Record 0 describes the start point; an
/// observer, when given, sees every record as soon as it is produced.
inline SolveResult solve(const ChannelInstance& inst,
                         const SolverConfig& config,
                         const IterationObserver& observer = {}) {
  config.validate();
  const Eigen::Index n = inst.dim();
  SolveResult result;
  result.u_hat = config.init == InitKind::identity
                     ? identity(n)
                     : random_unitary(n, config.init_seed);

  auto emit = [&](const IterationRecord& rec) {
    result.trace.records.push_back(rec);
    if (observer) observer(rec);
  };

  IterationRecord rec;
  rec.objective = objective(result.u_hat, inst);
  rec.residual = residual(result.u_hat, inst);
  emit(rec);
  if (rec.objective < config.tol) {
    result.status = SolveStatus::converged_tol;
    return result;
  }

  result.status = SolveStatus::max_iters;
  for (int s = 1; s <= config.max_iters; ++s) {
    detail::StepOutcome out = detail::step_impl(result.u_hat, inst);
    if (out.singular) result.trace.singular_gradient_iters.push_back(s);
    const double prev = rec.objective;
    rec.iter = s;
    rec.step_norm = (out.next - result.u_hat).norm();
    result.u_hat = std::move(out.next);
    rec.objective = objective(result.u_hat, inst);
    rec.residual = residual(result.u_hat, inst);
    if (rec.objective > prev + kMonotoneSlack) {
      result.trace.monotonicity_violations.push_back(s);
    }
    emit(rec);
    if (rec.objective < config.tol) {
      result.status = SolveStatus::converged_tol;
      break;
    }
    if (rec.step_norm < config.stall_tol) {
      result.status = SolveStatus::converged_stall;
      break;
    }
  }
  return result;
}

} // namespace polarchan
