#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "structh2/errors.hpp"
#include "structh2/linalg.hpp"
#include "test_util.hpp"

using namespace structh2;
using testutil::max_abs;

namespace {

TEST(Kron, IdentityTimesIdentity) {
  EXPECT_EQ(max_abs(kron(Matrix::Identity(2, 2), Matrix::Identity(3, 3)) - Matrix::Identity(6, 6)), 0.0);
}

TEST(Kron, RowTimesColumn) {
  Matrix a(1, 2);
  a << 1, 2;
  Matrix b(2, 1);
  b << 0, 3;
  Matrix expected(4, 1);
  expected << 0, 3, 0, 6;
  EXPECT_EQ(max_abs(kron(a, b) - expected), 0.0);
}

TEST(Kron, ZeroScalarAnnihilates) {
  std::mt19937_64 rng(1);
  const Matrix a = testutil::random_matrix(3, 4, rng);
  const Matrix k = kron(a, Matrix::Zero(1, 1));
  EXPECT_EQ(k.rows(), 3);
  EXPECT_EQ(k.cols(), 4);
  EXPECT_EQ(max_abs(k), 0.0);
}

TEST(Kron, MixedProductProperty) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = testutil::random_matrix(2, 3, rng);
    const Matrix b = testutil::random_matrix(3, 2, rng);
    const Matrix c = testutil::random_matrix(3, 2, rng);
    const Matrix d = testutil::random_matrix(2, 4, rng);
    EXPECT_LE(max_abs(kron(a, b) * kron(c, d) - kron(a * c, b * d)), 1e-10);
  }
}

TEST(Kron, Bilinear) {
  std::mt19937_64 rng(3);
  const Matrix a1 = testutil::random_matrix(2, 2, rng);
  const Matrix a2 = testutil::random_matrix(2, 2, rng);
  const Matrix b = testutil::random_matrix(3, 1, rng);
  EXPECT_LE(max_abs(kron(2.0 * a1 - a2, b) - (2.0 * kron(a1, b) - kron(a2, b))), 1e-12);
}

TEST(SymMatrix, SymmetrizesOnConstruction) {
  Matrix m(2, 2);
  m << 1, 2, 4, 3;
  const SymMatrix s(m);
  EXPECT_DOUBLE_EQ(s(0, 1), 3.0);
  EXPECT_LE(max_abs(s.matrix() - s.matrix().transpose()), 1e-12);
}

TEST(SolveDlyap, ZeroDynamicsReturnsM) {
  std::mt19937_64 rng(4);
  const SymMatrix m(testutil::random_psd(3, rng));
  EXPECT_LE(max_abs(solve_dlyap(Matrix::Zero(3, 3), m).matrix() - m.matrix()), 1e-14);
}

TEST(SolveDlyap, ScalarGeometricSeries) {
  const auto p = solve_dlyap(Matrix::Constant(1, 1, 0.5), SymMatrix(Matrix::Ones(1, 1)));
  EXPECT_NEAR(p(0, 0), 4.0 / 3.0, 1e-14);
}

TEST(SolveDlyap, MatchesTruncatedSeries) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = testutil::random_stable(3, 0.8, rng);
    const SymMatrix m(testutil::random_psd(3, rng));
    const auto p = solve_dlyap(a, m);
    // Oracle: Σ_{k<200} Aᵏ M (Aᵀ)ᵏ summed directly.
    Matrix series = Matrix::Zero(3, 3);
    Matrix ak = Matrix::Identity(3, 3);
    for (int k = 0; k < 200; ++k) {
      series += ak * m.matrix() * ak.transpose();
      ak = a * ak;
    }
    EXPECT_LE(max_abs(p.matrix() - series), 1e-9 * (1.0 + max_abs(series)));
  }
}

TEST(SolveDlyap, ResidualAndPsd) {
  std::mt19937_64 rng(6);
  for (int n = 1; n <= 8; ++n) {
    const Matrix a = testutil::random_stable(n, 0.95, rng);
    const SymMatrix m(testutil::random_psd(n, rng));
    const auto p = solve_dlyap(a, m);
    EXPECT_LE(max_abs(p.matrix() - a * p.matrix() * a.transpose() - m.matrix()),
              1e-10 * (1.0 + max_abs(m.matrix())));
    EXPECT_GE(min_eig(p), -1e-10);
  }
}

TEST(SolveDlyap, DoublingPathForLargeSystems) {
  std::mt19937_64 rng(7);
  const Matrix a = testutil::random_stable(40, 0.9, rng);
  const SymMatrix m(testutil::random_psd(40, rng));
  const auto p = solve_dlyap(a, m);
  EXPECT_LE(max_abs(p.matrix() - a * p.matrix() * a.transpose() - m.matrix()),
            1e-10 * (1.0 + max_abs(m.matrix())) * max_abs(p.matrix()));
}

TEST(SolveDlyap, RejectsUnstable) {
  EXPECT_THROW(solve_dlyap(Matrix::Identity(2, 2), SymMatrix(Matrix::Identity(2, 2))), UnstableMatrix);
  EXPECT_THROW(solve_dlyap(Matrix::Constant(1, 1, 1.5), SymMatrix(Matrix::Ones(1, 1))), UnstableMatrix);
}

TEST(H2Norm, ZeroOutput) {
  std::mt19937_64 rng(8);
  const Matrix a = testutil::random_stable(3, 0.5, rng);
  EXPECT_EQ(h2_norm(a, Matrix::Identity(3, 3), Matrix::Zero(2, 3)), 0.0);
}

TEST(H2Norm, ScalarCases) {
  const Matrix one = Matrix::Ones(1, 1);
  EXPECT_NEAR(h2_norm(Matrix::Zero(1, 1), one, one), 1.0, 1e-14);
  EXPECT_NEAR(h2_norm(Matrix::Constant(1, 1, 0.5), one, one), std::sqrt(4.0 / 3.0), 1e-14);
}

TEST(H2Norm, AgreesWithObservabilityForm) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + trial % 4;
    const Matrix a = testutil::random_stable(n, 0.9, rng);
    const Matrix e = testutil::random_matrix(n, 2, rng);
    const Matrix c = testutil::random_matrix(3, n, rng);
    const double g1 = h2_norm(a, e, c);
    const double g2 = h2_norm_observability(a, e, c);
    EXPECT_NEAR(g1 * g1, g2 * g2, 1e-8 * g1 * g1);
  }
}

TEST(H2Norm, ImpulseResponseEnergy) {
  std::mt19937_64 rng(10);
  const Matrix a = testutil::random_stable(3, 0.7, rng);
  const Matrix e = testutil::random_matrix(3, 2, rng);
  const Matrix c = testutil::random_matrix(2, 3, rng);
  double energy = 0.0;
  Matrix ak = Matrix::Identity(3, 3);
  for (int k = 0; k < 400; ++k) {
    energy += (c * ak * e).squaredNorm();
    ak = a * ak;
  }
  EXPECT_NEAR(h2_norm(a, e, c), std::sqrt(energy), 1e-10);
}

TEST(SpectralRadius, Examples) {
  EXPECT_NEAR(spectral_radius(Matrix::Identity(3, 3)), 1.0, 1e-12);
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 0.2, -0.9;
  EXPECT_NEAR(spectral_radius(d), 0.9, 1e-12);
  Matrix companion(2, 2);
  companion << 1, 1, 1, 0;
  EXPECT_NEAR(spectral_radius(companion), (1.0 + std::sqrt(5.0)) / 2.0, 1e-9);
}

TEST(SpectralRadius, ComplexPair) {
  Matrix rot(2, 2);
  rot << 0.6, -0.8, 0.8, 0.6;
  EXPECT_NEAR(spectral_radius(0.5 * rot), 0.5, 1e-12);
}

TEST(MinEig, Examples) {
  EXPECT_NEAR(min_eig(SymMatrix(Matrix::Identity(4, 4))), 1.0, 1e-12);
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 3, -2;
  EXPECT_NEAR(min_eig(SymMatrix(d)), -2.0, 1e-12);
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  EXPECT_NEAR(min_eig(SymMatrix(m)), 1.0, 1e-12);
  EXPECT_NEAR(max_eig(SymMatrix(m)), 3.0, 1e-12);
}

TEST(MinEig, AgreesWithFactorizationTest) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> shift(-0.5, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + trial % 6;
    Matrix m = testutil::random_psd(n, rng);
    const double lo = min_eig(SymMatrix(m));
    const double target = trial % 2 == 0 ? shift(rng) : 1e-6 * shift(rng);
    m += (target - lo) * Matrix::Identity(n, n);
    const SymMatrix s(m);
    const bool eig_psd = min_eig(s) >= -1e-9;
    if (std::abs(min_eig(s) + 1e-9) < 1e-11) continue;
    EXPECT_EQ(eig_psd, psd_by_factorization(s, 1e-9)) << "trial " << trial;
  }
}

TEST(PsdSqrt, ReconstructsAndClips) {
  std::mt19937_64 rng(12);
  const Matrix m = testutil::random_psd(4, rng);
  const Matrix r = psd_sqrt(SymMatrix(m));
  EXPECT_LE(max_abs(r * r - m), 1e-10 * (1.0 + max_abs(m)));
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 4, -1e-3;
  double clipped = 0.0;
  const Matrix rd = psd_sqrt(SymMatrix(d), &clipped);
  EXPECT_NEAR(clipped, -1e-3, 1e-15);
  EXPECT_NEAR(rd(0, 0), 2.0, 1e-14);
  EXPECT_EQ(rd(1, 1), 0.0);
}

TEST(RequireFinite, RejectsNaN) {
  Matrix m = Matrix::Zero(2, 2);
  m(1, 0) = std::nan("");
  EXPECT_THROW(require_finite(m, "m"), Error);
}

}  // namespace
