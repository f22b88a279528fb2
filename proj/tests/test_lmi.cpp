#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "structh2/lmi.hpp"
#include "structh2/sdp.hpp"
#include "test_util.hpp"

using namespace structh2;
using namespace structh2::lmi;
using testutil::max_abs;

namespace {

TEST(Svec, RoundTripAndInnerProduct) {
  std::mt19937_64 rng(21);
  for (Index d = 1; d <= 6; ++d) {
    const Matrix a = testutil::random_psd(d, rng) - testutil::random_psd(d, rng);
    const Matrix b = testutil::random_psd(d, rng);
    EXPECT_EQ(svec(a).size(), svec_size(d));
    EXPECT_LE(max_abs(smat(svec(a), d) - a), 1e-14);
    EXPECT_NEAR(svec(a).dot(svec(b)), (a * b).trace(), 1e-10 * (1.0 + a.norm() * b.norm()));
  }
  EXPECT_THROW(smat(Vector::Zero(4), 2), DimensionMismatch);
}

TEST(Variables, FreeEntryCounts) {
  LmiProblem p;
  EXPECT_EQ(p.symmetric(3).free_entries(), 6u);
  Mask diag = Mask::Constant(4, 4, false);
  for (Index i = 0; i < 4; ++i) diag(i, i) = true;
  EXPECT_EQ(p.symmetric(4, diag).free_entries(), 4u);
  EXPECT_EQ(p.scalar().free_entries(), 1u);
  Mask pat(2, 3);
  pat << true, true, false, false, true, true;
  EXPECT_EQ(p.rectangular(2, 3, pat).free_entries(), 4u);
  EXPECT_EQ(p.num_scalars(), 15);
  Mask asym = Mask::Constant(2, 2, true);
  asym(0, 1) = false;
  EXPECT_THROW(p.symmetric(2, asym), Error);
  EXPECT_THROW(p.declare(2, 3, VarKind::Symmetric), DimensionMismatch);
}

TEST(Variables, AssignAndValueRoundTrip) {
  LmiProblem p;
  const auto s = p.symmetric(3);
  Mask pat(2, 3);
  pat << true, false, true, true, true, false;
  const auto r = p.rectangular(2, 3, pat);
  std::mt19937_64 rng(22);
  const Matrix sv = testutil::random_psd(3, rng);
  Matrix rv = testutil::random_matrix(2, 3, rng);
  rv(0, 1) = rv(1, 2) = 0.0;
  Vector x = Vector::Zero(p.num_scalars());
  LmiProblem::assign(s, sv, x);
  LmiProblem::assign(r, rv, x);
  EXPECT_LE(max_abs(LmiProblem::value(s, x) - sv), 1e-15);
  EXPECT_EQ(LmiProblem::value(r, x), rv);
  EXPECT_LE(max_abs(expr(s).evaluate(x) - sv), 1e-15);
}

TEST(AffineExpr, AlgebraEvaluatesPointwise) {
  LmiProblem p;
  const auto x = p.symmetric(2);
  const auto y = p.rectangular(3, 2);
  std::mt19937_64 rng(23);
  const Matrix a = testutil::random_matrix(3, 3, rng);
  const Matrix b = testutil::random_matrix(2, 2, rng);
  const auto e = AffineExpr::blocks({{expr(x) * b + b.transpose() * expr(x), (a * expr(y)).transpose()},
                                     {a * expr(y), AffineExpr(Matrix::Identity(3, 3))}});
  Vector v(p.num_scalars());
  for (Index i = 0; i < v.size(); ++i) v(i) = std::normal_distribution<double>(0, 1)(rng);
  const Matrix xv = LmiProblem::value(x, v);
  const Matrix yv = LmiProblem::value(y, v);
  Matrix expected(5, 5);
  expected << xv * b + b.transpose() * xv, (a * yv).transpose(), a * yv, Matrix::Identity(3, 3);
  EXPECT_LE(max_abs(e.evaluate(v) - expected), 1e-12);
  EXPECT_NEAR(expr(x).trace().evaluate(v)(0, 0), xv.trace(), 1e-14);
  EXPECT_LE(max_abs(e.block(3, 0, 2, 2).evaluate(v) - expected.block(3, 0, 2, 2)), 1e-12);
  EXPECT_THROW(expr(x) + expr(y), DimensionMismatch);
}

TEST(Compile, ScalarLowerBound) {
  LmiProblem p;
  const auto x = p.scalar();
  p.add_psd(expr(x) - Matrix::Ones(1, 1));
  p.minimize(expr(x));
  const auto f = p.compile();
  EXPECT_EQ(f.num_vars, 1);
  EXPECT_EQ(f.cone_size(), 1);
  const auto rep = sdp::solve(f);
  ASSERT_EQ(rep.status, sdp::Status::Optimal);
  EXPECT_NEAR(rep.x(0), 1.0, 1e-6);
  EXPECT_NEAR(rep.primal_objective, 1.0, 1e-6);
}

TEST(Compile, TraceAboveIdentity) {
  LmiProblem p;
  const auto x = p.symmetric(2);
  p.add_psd(expr(x) - Matrix::Identity(2, 2), 0.0, "lower");
  p.minimize(expr(x).trace());
  const auto rep = sdp::solve(p.compile());
  ASSERT_EQ(rep.status, sdp::Status::Optimal);
  EXPECT_NEAR(rep.primal_objective, 2.0, 1e-6);
  EXPECT_LE(max_abs(LmiProblem::value(x, rep.x) - Matrix::Identity(2, 2)), 1e-5);
}

TEST(Compile, MarginShiftsTheBlock) {
  LmiProblem p;
  const auto x = p.scalar();
  p.add_psd(expr(x), 0.25);
  p.minimize(expr(x) + Matrix::Constant(1, 1, 3.0));
  const auto f = p.compile();
  EXPECT_EQ(f.c0, 3.0);
  const auto rep = sdp::solve(f);
  ASSERT_EQ(rep.status, sdp::Status::Optimal);
  EXPECT_NEAR(rep.primal_objective, 3.25, 1e-6);
}

TEST(TraceLeq, BoundsTheTrace) {
  LmiProblem p;
  const auto q = p.symmetric(2);
  const auto g = p.scalar();
  trace_leq(p, q, g);
  Matrix m(2, 2);
  m << 2, 1, 1, 3;
  p.add_psd(expr(q) - m);
  p.minimize(expr(g));
  const auto rep = sdp::solve(p.compile());
  ASSERT_EQ(rep.status, sdp::Status::Optimal);
  EXPECT_NEAR(rep.primal_objective, 5.0, 1e-6);
  EXPECT_THROW(trace_leq(p, g, q), Error);
}

TEST(Equalities, ConstantOnlyContradictionIsKept) {
  LmiProblem p;
  const auto x = p.scalar();
  p.add_equality(expr(x) * 0.0 + Matrix::Ones(1, 1));
  EXPECT_TRUE(p.trivially_infeasible_equalities());
  p.add_psd(expr(x));
  p.minimize(expr(x));
  const auto rep = sdp::solve(p.compile());
  EXPECT_EQ(rep.status, sdp::Status::Infeasible);
}

TEST(Compile, ForeignVariableIsRejected) {
  LmiProblem small;
  LmiProblem big;
  big.scalar();
  big.scalar();
  const auto foreign = big.scalar();
  small.scalar();
  small.add_psd(expr(foreign));
  EXPECT_THROW(small.compile(), UnboundedShape);
}

TEST(Compile, NonSymmetricBlockIsRejected) {
  LmiProblem p;
  const auto y = p.rectangular(2, 2);
  EXPECT_THROW(p.add_psd(expr(y)), Error);
}

TEST(ConicForm, DumpMentionsEveryBlock) {
  LmiProblem p;
  const auto x = p.symmetric(2);
  p.add_psd(expr(x));
  p.add_psd(expr(x).trace());
  p.minimize(expr(x).trace());
  std::ostringstream out;
  p.compile().dump(out);
  EXPECT_NE(out.str().find("2"), std::string::npos);
  EXPECT_FALSE(out.str().empty());
}

}  // namespace
