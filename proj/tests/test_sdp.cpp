#include <random>

#include <gtest/gtest.h>

#include "structh2/linalg.hpp"
#include "structh2/lmi.hpp"
#include "structh2/sdp.hpp"
#include "test_util.hpp"

using namespace structh2;
using namespace structh2::lmi;
using testutil::max_abs;

namespace {

// min Tr X s.t. X ⪰ M: optimum Σ max(λᵢ(M), 0).
TEST(Sdp, TraceAboveRandomMatrix) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Index d = 2 + trial % 4;
    const Matrix m = testutil::random_psd(d, rng) - testutil::random_psd(d, rng);
    LmiProblem p;
    const auto x = p.symmetric(d);
    p.add_psd(expr(x) - m);
    p.add_psd(expr(x));
    p.minimize(expr(x).trace());
    const auto rep = sdp::solve(p.compile());
    ASSERT_EQ(rep.status, sdp::Status::Optimal);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    const double expected = es.eigenvalues().cwiseMax(0.0).sum();
    EXPECT_NEAR(rep.primal_objective, expected, 1e-6 * (1.0 + expected));
  }
}

// max t s.t. M − tI ⪰ 0: optimum λ_min(M).
TEST(Sdp, MaximalShiftIsMinimumEigenvalue) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    const Index d = 2 + trial % 5;
    const Matrix m = testutil::random_psd(d, rng) - testutil::random_psd(d, rng);
    LmiProblem p;
    const auto t = p.scalar();
    p.add_psd(AffineExpr(m) - AffineExpr::scaled(expr(t), Matrix::Identity(d, d)));
    p.minimize(-expr(t));
    const auto rep = sdp::solve(p.compile());
    ASSERT_EQ(rep.status, sdp::Status::Optimal);
    EXPECT_NEAR(rep.x(0), min_eig(SymMatrix(m)), 1e-6);
  }
}

TEST(Sdp, EqualityConstrainedProblem) {
  // min X₁₁ + X₂₂ s.t. X₁₂ = 1, X ⪰ 0: optimum 2.
  LmiProblem p;
  const auto x = p.symmetric(2);
  p.add_psd(expr(x));
  p.add_equality(expr(x).block(0, 1, 1, 1) - Matrix::Ones(1, 1));
  p.minimize(expr(x).trace());
  const auto rep = sdp::solve(p.compile());
  ASSERT_EQ(rep.status, sdp::Status::Optimal);
  EXPECT_NEAR(rep.primal_objective, 2.0, 1e-6);
}

TEST(Sdp, WeakDualityAndSmallGap) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = testutil::random_stable(3, 0.8, rng);
    // min Tr P s.t. P − AᵀPA ⪰ I.
    LmiProblem p;
    const auto pv = p.symmetric(3);
    p.add_psd(expr(pv) - a.transpose() * expr(pv) * a - Matrix::Identity(3, 3));
    p.minimize(expr(pv).trace());
    const auto rep = sdp::solve(p.compile());
    ASSERT_EQ(rep.status, sdp::Status::Optimal);
    EXPECT_GE(rep.primal_objective - rep.dual_objective, -1e-6 * (1.0 + std::abs(rep.primal_objective)));
    EXPECT_LE(std::abs(rep.primal_objective - rep.dual_objective), 1e-5 * (1.0 + std::abs(rep.primal_objective)));
    const double expected = solve_dlyap(a.transpose(), SymMatrix(Matrix::Identity(3, 3))).matrix().trace();
    EXPECT_NEAR(rep.primal_objective, expected, 1e-5 * expected);
  }
}

// X ⪰ I and X ⪯ −I: the solver must return a verifiable certificate.
TEST(Sdp, InfeasibleCertificateChecksOut) {
  LmiProblem p;
  const auto x = p.symmetric(2);
  p.add_psd(expr(x) - Matrix::Identity(2, 2));
  p.add_psd(-expr(x) - Matrix::Identity(2, 2));
  p.minimize(expr(x).trace());
  const auto f = p.compile();
  const auto rep = sdp::solve(f);
  ASSERT_EQ(rep.status, sdp::Status::Infeasible);
  Index offset = 0;
  for (const Index d : f.block_dims) {
    const Index len = svec_size(d);
    EXPECT_GE(min_eig(SymMatrix(smat(rep.z.segment(offset, len), d))), -1e-9);
    offset += len;
  }
  Vector gtz = f.G.transpose() * rep.z;
  double hz = f.h.dot(rep.z);
  if (rep.y.size() > 0) {
    gtz += f.A.transpose() * rep.y;
    hz += f.b.dot(rep.y);
  }
  EXPECT_LE(gtz.norm(), 1e-7);
  EXPECT_NEAR(hz, -1.0, 1e-9);
  EXPECT_LE(rep.certificate_residual, 1e-7);
}

TEST(Sdp, InconsistentEqualitiesAreInfeasible) {
  LmiProblem p;
  const auto x = p.scalar();
  p.add_equality(expr(x) - Matrix::Ones(1, 1));
  p.add_equality(expr(x) - 2.0 * Matrix::Ones(1, 1));
  p.add_psd(expr(x));
  p.minimize(expr(x));
  EXPECT_EQ(sdp::solve(p.compile()).status, sdp::Status::Infeasible);
}

TEST(Sdp, UnboundedObjectiveIsDetected) {
  LmiProblem p;
  const auto x = p.scalar();
  p.add_psd(expr(x));
  p.minimize(-expr(x));
  const auto rep = sdp::solve(p.compile());
  EXPECT_EQ(rep.status, sdp::Status::Unbounded);
}

TEST(Sdp, DeterministicAcrossRuns) {
  std::mt19937_64 rng(34);
  const Matrix m = testutil::random_psd(4, rng) - testutil::random_psd(4, rng);
  LmiProblem p;
  const auto x = p.symmetric(4);
  p.add_psd(expr(x) - m);
  p.minimize(expr(x).trace());
  const auto f = p.compile();
  const auto a = sdp::solve(f);
  const auto b = sdp::solve(f);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Sdp, IterationCapReportsNumericalTrouble) {
  LmiProblem p;
  const auto x = p.symmetric(3);
  p.add_psd(expr(x) - Matrix::Identity(3, 3));
  p.minimize(expr(x).trace());
  sdp::Options opts;
  opts.max_iter = 1;
  EXPECT_EQ(sdp::solve(p.compile(), opts).status, sdp::Status::NumericalTrouble);
}

}  // namespace
