#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "structh2/errors.hpp"
#include "structh2/subspace.hpp"
#include "test_util.hpp"

using namespace structh2;
using testutil::max_abs;

namespace {

Mask example_pattern() {
  Mask m(2, 3);
  m << true, true, false, false, true, true;
  return m;
}

Matrix unit(Index r, Index c, Index i, Index j) {
  Matrix e = Matrix::Zero(r, c);
  e(i, j) = 1.0;
  return e;
}

/// Random Q satisfying the Υ equations with a random Λ.
Matrix random_upsilon_member(const SubspaceSpec& spec, std::mt19937_64& rng) {
  const auto basis = upsilon_basis(spec);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix q = Matrix::Zero(spec.n(), spec.n());
  for (const auto& b : basis) q += g(rng) * b;
  return q;
}

TEST(FromPattern, ExampleBasisInRowMajorOrder) {
  const auto s = SubspaceSpec::from_pattern(example_pattern());
  ASSERT_EQ(s.k(), 4);
  EXPECT_EQ(s.basis()[0], unit(2, 3, 0, 0));
  EXPECT_EQ(s.basis()[1], unit(2, 3, 0, 1));
  EXPECT_EQ(s.basis()[2], unit(2, 3, 1, 1));
  EXPECT_EQ(s.basis()[3], unit(2, 3, 1, 2));
  const Matrix rep = s.repmat();
  ASSERT_EQ(rep.rows(), 2);
  ASSERT_EQ(rep.cols(), 12);
  EXPECT_EQ(Matrix(rep.middleCols(6, 3)), unit(2, 3, 1, 1));
}

TEST(FromPattern, FullPatternSpansEverything) {
  const auto s = SubspaceSpec::from_pattern(Mask::Constant(2, 2, true));
  EXPECT_EQ(s.k(), 4);
  std::mt19937_64 rng(1);
  EXPECT_TRUE(contains(s, testutil::random_matrix(2, 2, rng)));
}

TEST(FromPattern, EmptyPatternThrows) {
  EXPECT_THROW(SubspaceSpec::from_pattern(Mask::Constant(2, 2, false)), EmptySubspace);
}

TEST(FromBasis, RejectsDependentBasis) {
  EXPECT_THROW(SubspaceSpec::from_basis({unit(2, 2, 0, 0), 2.0 * unit(2, 2, 0, 0)}), Error);
  EXPECT_THROW(SubspaceSpec::from_basis({unit(2, 2, 0, 0), unit(3, 2, 0, 0)}), DimensionMismatch);
  EXPECT_THROW(SubspaceSpec::from_basis({}), EmptySubspace);
}

TEST(Contains, PatternExamples) {
  const auto s = SubspaceSpec::from_pattern(example_pattern());
  Matrix k(2, 3);
  k << 0.3, -1.2, 0.0, 0.0, 2.0, 0.7;
  EXPECT_TRUE(contains(s, k));
  k(0, 2) = 0.5;
  EXPECT_FALSE(contains(s, k));
  EXPECT_THROW(contains(s, Matrix::Zero(3, 2)), DimensionMismatch);
}

TEST(Contains, RandomCombinationOfGeneralBasis) {
  std::mt19937_64 rng(2);
  std::vector<Matrix> basis;
  for (int i = 0; i < 3; ++i) basis.push_back(testutil::random_matrix(2, 4, rng));
  const auto s = SubspaceSpec::from_basis(basis);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix k = Matrix::Zero(2, 4);
    for (const auto& b : basis) k += g(rng) * b;
    EXPECT_TRUE(contains(s, k));
    EXPECT_FALSE(contains(s, k + 0.1 * testutil::random_matrix(2, 4, rng)));
  }
}

TEST(Upsilon, IdentityPairSatisfiesSystem) {
  std::mt19937_64 rng(3);
  const auto pattern = SubspaceSpec::from_pattern(example_pattern());
  std::vector<Matrix> basis;
  for (int i = 0; i < 3; ++i) basis.push_back(testutil::random_matrix(2, 3, rng));
  const auto general = SubspaceSpec::from_basis(basis);
  for (const auto* s : {&pattern, &general}) {
    for (auto kind : {LambdaKind::General, LambdaKind::Symmetric}) {
      const auto c = upsilon_constraints(*s, kind);
      EXPECT_EQ(c.residual(Matrix::Identity(3, 3), Matrix::Identity(s->k(), s->k())), 0.0);
      EXPECT_TRUE(upsilon_member(*s, Matrix::Identity(3, 3), kMembershipTol, kind));
    }
  }
}

TEST(Upsilon, DiagonalQWithMatchingLambda) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const auto s = SubspaceSpec::from_pattern(example_pattern());
  const auto c = upsilon_constraints(s);
  // Column index of each basis element e_r e_cᵀ.
  const std::vector<Index> cols{0, 1, 1, 2};
  for (int trial = 0; trial < 50; ++trial) {
    Vector d(3);
    d << u(rng), u(rng), u(rng);
    Matrix lambda = Matrix::Zero(4, 4);
    for (Index l = 0; l < 4; ++l) lambda(l, l) = d(cols[static_cast<std::size_t>(l)]);
    EXPECT_LE(c.residual(d.asDiagonal(), lambda), 1e-15);
    EXPECT_TRUE(upsilon_member(s, d.asDiagonal()));
  }
}

TEST(Upsilon, ForcedZerosOfExamplePattern) {
  const auto s = SubspaceSpec::from_pattern(example_pattern());
  const Mask zeros = upsilon_forced_zeros(s);
  Mask expected = Mask::Constant(3, 3, false);
  expected(0, 2) = expected(1, 0) = expected(1, 2) = expected(2, 0) = true;
  EXPECT_TRUE((zeros == expected).all());
}

TEST(Upsilon, StructuredMembersAndViolations) {
  const auto s = SubspaceSpec::from_pattern(example_pattern());
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix q = Matrix::Zero(3, 3);
    q(0, 0) = g(rng);
    q(0, 1) = g(rng);
    q(1, 1) = g(rng);
    q(2, 1) = g(rng);
    q(2, 2) = g(rng);
    EXPECT_TRUE(upsilon_member(s, q));
  }
  Matrix bad = Matrix::Identity(3, 3);
  bad(1, 0) = 1.0;
  EXPECT_FALSE(upsilon_member(s, bad));
  EXPECT_GT(upsilon_residual(s, bad), 0.5);
}

TEST(Upsilon, SymmetricLambdaIsStricter) {
  // With Λ = Λᵀ the example pattern only admits diagonal Q.
  const auto s = SubspaceSpec::from_pattern(example_pattern());
  Matrix q = Matrix::Identity(3, 3);
  q(0, 1) = 0.4;
  EXPECT_TRUE(upsilon_member(s, q, kMembershipTol, LambdaKind::General));
  EXPECT_FALSE(upsilon_member(s, q, kMembershipTol, LambdaKind::Symmetric));
}

TEST(Upsilon, EquationsAgreeWithLeastSquaresResidual) {
  std::mt19937_64 rng(6);
  std::vector<Matrix> basis;
  for (int i = 0; i < 4; ++i) basis.push_back(testutil::random_matrix(2, 3, rng));
  const auto s = SubspaceSpec::from_basis(basis);
  const auto c = upsilon_constraints(s);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix q = random_upsilon_member(s, rng);
    EXPECT_LE(upsilon_residual(s, q), 1e-10 * (1.0 + q.norm()));
    // Recover Λ column by column and check the explicit equations.
    Matrix lambda(4, 4);
    for (Index j = 0; j < 4; ++j) {
      const Matrix sjq = basis[static_cast<std::size_t>(j)] * q;
      const Vector v = Eigen::Map<const Vector>(sjq.data(), sjq.size());
      lambda.col(j) = s.vectorized_basis().colPivHouseholderQr().solve(v);
    }
    EXPECT_LE(c.residual(q, lambda), 1e-10 * (1.0 + q.norm()));
  }
}

// L ∈ 𝒮 and invertible R ∈ Υ(S) give L·R⁻¹ ∈ 𝒮.
TEST(Upsilon, ClosureProperty) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  int checked = 0;
  while (checked < 1000) {
    const Index m = 1 + static_cast<Index>(rng() % 3);
    const Index n = 2 + static_cast<Index>(rng() % 3);
    std::optional<SubspaceSpec> spec;
    if (checked % 4 == 3) {
      std::vector<Matrix> basis;
      const Index k = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(m * n));
      for (Index i = 0; i < k; ++i) basis.push_back(testutil::random_matrix(m, n, rng));
      try {
        spec = SubspaceSpec::from_basis(basis);
      } catch (const Error&) {
        continue;
      }
    } else {
      Mask p(m, n);
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) p(i, j) = coin(rng);
      if (!p.any()) continue;
      spec = SubspaceSpec::from_pattern(p);
    }
    Matrix l = Matrix::Zero(m, n);
    for (const auto& b : spec->basis()) l += g(rng) * b;
    const Matrix r = random_upsilon_member(*spec, rng);
    Eigen::JacobiSVD<Matrix> svd(r);
    const Vector sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 0.0 || sv(0) / sv(sv.size() - 1) >= 1e6) continue;
    const Matrix k = l * r.inverse();
    EXPECT_TRUE(contains(*spec, k, 1e-7)) << "distance " << spec->distance(k);
    ++checked;
  }
}

TEST(Upsilon, DiagonalAlwaysMemberForPatterns) {
  std::mt19937_64 rng(8);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Mask p(2, 4);
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 4; ++j) p(i, j) = coin(rng);
    if (!p.any()) continue;
    const auto s = SubspaceSpec::from_pattern(p);
    Vector d(4);
    for (Index i = 0; i < 4; ++i) d(i) = g(rng);
    EXPECT_TRUE(upsilon_member(s, d.asDiagonal()));
  }
}

TEST(Files, PatternAndBasisFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "structh2_subspace_files";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "pattern.csv") << "1,1,0\n0,1,1\n";
  std::ofstream(dir / "bad.csv") << "1,2,0\n0,1,1\n";
  std::ofstream(dir / "basis.csv") << "1,0,0\n0,0,0\n\n0,1,0\n0,1,0\n";
  EXPECT_TRUE((read_pattern(dir / "pattern.csv") == example_pattern()).all());
  EXPECT_THROW(read_pattern(dir / "bad.csv"), ParseError);
  const auto s = read_basis(dir / "basis.csv");
  EXPECT_EQ(s.k(), 2);
  Matrix k(2, 3);
  k << 2, 3, 0, 0, 3, 0;
  EXPECT_TRUE(contains(s, k));
  k(1, 1) = 1.0;
  EXPECT_FALSE(contains(s, k));
  std::filesystem::remove_all(dir);
}

}  // namespace
