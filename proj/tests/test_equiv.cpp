#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "polarchan/equiv.hpp"
#include "polarchan/search.hpp"
#include "test_util.hpp"

using namespace polarchan;

namespace {

ComplexVector random_phases(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  ComplexVector d(n);
  for (Eigen::Index k = 0; k < n; ++k) d(k) = std::polar(1.0, angle(rng));
  return d;
}

ComplexMatrix member(const ComplexMatrix& u, const ComplexMatrix& v,
                     const ComplexVector& d) {
  return u * v * d.asDiagonal() * v.adjoint();
}

TEST(GlobalPhaseAlign, Self) {
  const ComplexMatrix u = random_unitary(5, 1);
  const PhaseAlignment a = global_phase_align(u, u);
  EXPECT_NEAR(std::abs(a.mu - 1.0), 0.0, 1e-14);
  EXPECT_NEAR(a.distance, 0.0, 1e-13);
  EXPECT_FALSE(a.degenerate);
}

TEST(GlobalPhaseAlign, ExactPhase) {
  const ComplexMatrix v = random_unitary(4, 2);
  const Complex phase = std::polar(1.0, 0.7);
  const PhaseAlignment a = global_phase_align(phase * v, v);
  EXPECT_LT(a.distance, 1e-12);
  EXPECT_NEAR(std::abs(a.mu - phase), 0.0, 1e-14);
}

TEST(GlobalPhaseAlign, DistanceIdentity) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(s % 7);
    const ComplexMatrix u = random_unitary(n, s);
    const ComplexMatrix v = random_unitary(n, s + 100);
    const PhaseAlignment a = global_phase_align(u, v);
    EXPECT_NEAR(std::abs(a.mu), 1.0, 1e-12);
    const double expect =
        2.0 * static_cast<double>(n) - 2.0 * std::abs((v.adjoint() * u).trace());
    EXPECT_NEAR(a.distance * a.distance, expect, 1e-10);
    // Left-multiplying both arguments by a unitary keeps the distance.
    const ComplexMatrix w = random_unitary(n, s + 200);
    EXPECT_NEAR(global_phase_align(w * u, w * v).distance, a.distance, 1e-12);
  }
}

TEST(GlobalPhaseAlign, DegenerateTrace) {
  // tr(V* U) = 0 for the Pauli X against the identity.
  ComplexMatrix x = ComplexMatrix::Zero(2, 2);
  x(0, 1) = 1.0;
  x(1, 0) = 1.0;
  const PhaseAlignment a = global_phase_align(x, identity(2));
  EXPECT_TRUE(a.degenerate);
  EXPECT_EQ(a.mu, Complex(1.0, 0.0));
  EXPECT_NEAR(a.distance, 2.0, 1e-15);
  EXPECT_THROW(global_phase_align(identity(2), identity(3)), DimensionError);
}

TEST(ChannelUnderPhase, IdenticalAction) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const ComplexMatrix u = random_unitary(6, s);
    const ComplexMatrix rho = random_density(6, s + 1);
    const Complex mu = std::polar(1.0, 0.3 * static_cast<double>(s));
    const ComplexMatrix a = u * rho * u.adjoint();
    const ComplexMatrix b = (mu * u) * rho * (mu * u).adjoint();
    EXPECT_LT((a - b).norm(), 1e-14);
  }
}

TEST(RelationMatrix, Reflexive) {
  const ComplexMatrix u = random_unitary(4, 3);
  const ComplexMatrix v = random_unitary(4, 4);
  const DiagonalRelation rel = relation_matrix(u, u, v);
  EXPECT_LT((rel.d_hat - ComplexVector::Ones(4)).norm(), 1e-13);
  EXPECT_LT(rel.offdiag_mass, 1e-13);
}

TEST(RelationMatrix, RecoversConstructedPhases) {
  const ComplexMatrix u2 = random_unitary(5, 5);
  const ComplexMatrix v = random_unitary(5, 6);
  const ComplexVector d = random_phases(5, 7);
  const DiagonalRelation rel = relation_matrix(member(u2, v, d), u2, v);
  EXPECT_LT((rel.d_hat - d).norm(), 1e-12);
  EXPECT_LT(rel.offdiag_mass, 1e-12);
}

TEST(RelationMatrix, ShapeMismatch) {
  EXPECT_THROW(relation_matrix(identity(2), identity(2), identity(3)),
               DimensionError);
}

TEST(IsEquivUnder, RelationProperties) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(s % 6);
    const ComplexMatrix u1 = random_unitary(n, s);
    const ComplexMatrix v = random_unitary(n, s + 50);
    const ComplexMatrix u2 = member(u1, v, random_phases(n, s + 60));
    const ComplexMatrix u3 = member(u2, v, random_phases(n, s + 70));
    EXPECT_TRUE(is_equiv_under(u1, u1, v, 1e-10));
    EXPECT_TRUE(is_equiv_under(u1, u2, v, 1e-10));
    EXPECT_TRUE(is_equiv_under(u2, u1, v, 1e-10));
    EXPECT_TRUE(is_equiv_under(u2, u3, v, 1e-10));
    EXPECT_TRUE(is_equiv_under(u1, u3, v, 1e-10));
    EXPECT_FALSE(is_equiv_under(u1, random_unitary(n, s + 80), v, 1e-6));
  }
}

TEST(IsEquivUnder, MembersShareTheChannelOnRho) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const ComplexMatrix rho = random_density(6, s);
    const ComplexMatrix v = hermitian_eig(rho).eigenvectors;
    const ComplexMatrix u = random_unitary(6, s + 1);
    const ComplexMatrix u_prime = member(u, v, random_phases(6, s + 2));
    EXPECT_TRUE(is_equiv_under(u_prime, u, v, 1e-10));
    EXPECT_LT((u * rho * u.adjoint() - u_prime * rho * u_prime.adjoint()).norm(),
              1e-12);
  }
}

TEST(IsEquivUnder, SolverRunsFromDifferentStarts) {
  const ComplexMatrix rho = random_density(4, 11);
  const ChannelInstance inst =
      ChannelInstance::exact(random_unitary(4, 12), {rho});
  SolverConfig a;
  SolverConfig b;
  b.init = InitKind::random;
  b.init_seed = 99;
  const SolveResult ra = solve(inst, a);
  const SolveResult rb = solve(inst, b);
  ASSERT_EQ(ra.status, SolveStatus::converged_tol);
  ASSERT_EQ(rb.status, SolveStatus::converged_tol);
  const ComplexMatrix v = hermitian_eig(rho).eigenvectors;
  const DiagonalRelation rel = relation_matrix(ra.u_hat, rb.u_hat, v);
  EXPECT_LT(rel.offdiag_mass, 1e-6);
  for (Eigen::Index k = 0; k < 4; ++k) {
    EXPECT_NEAR(std::abs(rel.d_hat(k)), 1.0, 1e-6);
  }
  EXPECT_TRUE(is_equiv_under(ra.u_hat, rb.u_hat, v, 1e-6));
}

TEST(NormalizedDiff, PhaseCancels) {
  const ComplexMatrix u = random_unitary(5, 13);
  for (double theta : {0.0, 1.0, -2.5, M_PI}) {
    const Complex mu = std::polar(1.0, theta);
    EXPECT_LT(normalized_diff(u, mu * u), 1e-12);
    EXPECT_LT(normalized_diff(u, mu * u, Pivot::max_modulus), 1e-12);
  }
}

TEST(NormalizedDiff, UnrelatedIsOrderOne) {
  int big = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    if (normalized_diff(random_unitary(4, s), random_unitary(4, s + 500)) > 0.1) {
      ++big;
    }
  }
  EXPECT_GE(big, 18);
}

TEST(NormalizedDiff, PivotTooSmall) {
  ComplexMatrix x = ComplexMatrix::Zero(2, 2);
  x(0, 1) = 1.0;
  x(1, 0) = 1.0;
  EXPECT_THROW(normalized_diff(x, x), PreconditionError);
  EXPECT_NEAR(normalized_diff(x, Complex(0, 1) * x, Pivot::max_modulus), 0.0,
              1e-15);
}

TEST(NormalizedDiff, ZeroOnlyForScalarMultiple) {
  const ComplexMatrix u = random_unitary(3, 14);
  ComplexMatrix w = u;
  w(2, 1) += 1e-6;
  EXPECT_GT(normalized_diff(u, w), 1e-7);
}

} // namespace
