#include <gtest/gtest.h>

#include "structh2/example1.hpp"
#include "structh2/verification.hpp"
#include "test_util.hpp"

using namespace structh2;

namespace {

DataBatch example_batch(double eps, Index samples, std::uint64_t seed) {
  const auto truth = example1::plant();
  const Matrix u = uniform_inputs(truth.m(), samples, 3.0, seed);
  return simulate(truth, example1::x0(), u, eps, seed).batch;
}

TEST(VerifyModel, PrintedGainOnExampleOne) {
  const auto rep = verify_model(example1::plant(), example1::spec(), example1::reference_gain(),
                                example1::subspace());
  EXPECT_TRUE(rep.stable);
  EXPECT_TRUE(rep.structure_ok);
  EXPECT_TRUE(rep.h2.finite);
  EXPECT_TRUE(rep.passed());
}

TEST(VerifyModel, ZeroGainMatchesOpenLoopNorm) {
  std::mt19937_64 rng(51);
  const PlantPair plant{testutil::random_stable(3, 0.7, rng), testutil::random_matrix(3, 2, rng)};
  const PerformanceSpec spec{testutil::random_matrix(2, 3, rng), testutil::random_matrix(2, 2, rng),
                             Matrix::Identity(3, 3)};
  const auto rep = verify_model(plant, spec, Matrix::Zero(2, 3));
  EXPECT_TRUE(rep.stable);
  EXPECT_DOUBLE_EQ(rep.h2.value, h2_norm(plant.A, spec.E, spec.C));
}

TEST(VerifyModel, UnstableLoopGivesInfiniteSentinel) {
  const PlantPair plant{Matrix::Constant(1, 1, 2.0), Matrix::Zero(1, 1)};
  const PerformanceSpec spec{Matrix::Ones(1, 1), Matrix::Zero(1, 1), Matrix::Ones(1, 1)};
  const auto rep = verify_model(plant, spec, Matrix::Zero(1, 1));
  EXPECT_FALSE(rep.stable);
  EXPECT_FALSE(rep.h2.finite);
  EXPECT_FALSE(rep.passed());
  const auto j = to_json(rep);
  EXPECT_TRUE(j["h2"].is_null());
  EXPECT_TRUE(j["h2_infinite"].get<bool>());
}

TEST(VerifyModel, StructureAndSharingViolations) {
  Matrix k = example1::reference_gain();
  k(0, 2) = 0.1;
  const auto rep = verify_model(example1::plant(), example1::spec(), k, example1::subspace(), true);
  EXPECT_FALSE(rep.structure_ok);
  EXPECT_FALSE(rep.sharing_ok);
  EXPECT_EQ(rep.violations.size(), 2u);
}

TEST(VerifyModel, AgreesWithFixedGainCertificate) {
  const auto plant = example1::plant();
  const auto spec = example1::spec();
  const Matrix k = example1::reference_gain();
  const auto rep = verify_model(plant, spec, k);
  EXPECT_NEAR(rep.h2.value, certify_fixed_k(plant, spec, k), 1e-4 * rep.h2.value);
}

TEST(VerifyData, OptimalDesignHasNoViolations) {
  const auto spec = example1::spec();
  for (double eps : {0.05, 0.1}) {
    const auto batch = example_batch(eps, 20, 5);
    DesignOptions o;
    o.design = Design::D4;
    o.subspace = example1::subspace();
    const auto r = design_data(batch, spec, o);
    ASSERT_TRUE(r.optimal());
    const auto rep = verify_data(batch, spec, r.K, r.gamma, 200, 9, example1::subspace(), false,
                                 example1::plant());
    EXPECT_TRUE(rep.passed()) << (rep.violations.empty() ? "" : rep.violations.front());
    EXPECT_EQ(rep.samples_checked, 200u);
    ASSERT_TRUE(rep.worst_case_h2.has_value());
    EXPECT_LE(rep.worst_case_h2->value, r.gamma * (1.0 + 1e-4));
    EXPECT_GE(rep.worst_case_h2->value, rep.h2.value * 0.5);
    EXPECT_GE(*rep.true_plant_margin, -1e-9);

    if (eps == 0.05) {
      const auto halved = verify_data(batch, spec, r.K, 0.5 * r.gamma, 200, 9);
      EXPECT_FALSE(halved.passed());
    }
  }
}

TEST(VerifyData, ZeroSamplesReportsOnlyTruth) {
  const auto batch = example_batch(0.1, 20, 6);
  const auto rep = verify_data(batch, example1::spec(), example1::reference_gain(), 10.0, 0, 1,
                               std::nullopt, false, example1::plant());
  EXPECT_FALSE(rep.worst_case_h2.has_value());
  EXPECT_EQ(rep.samples_checked, 0u);
  EXPECT_TRUE(rep.true_plant_margin.has_value());
  EXPECT_TRUE(to_json(rep)["worst_case_h2"].is_null());
}

TEST(VerifyData, PureFunctionOfSeed) {
  const auto batch = example_batch(0.1, 20, 7);
  const Matrix k = example1::reference_gain();
  const auto a = to_json(verify_data(batch, example1::spec(), k, 3.5, 50, 3)).dump();
  const auto b = to_json(verify_data(batch, example1::spec(), k, 3.5, 50, 3)).dump();
  EXPECT_EQ(a, b);
}

TEST(VerifyData, RankDeficientBatchThrows) {
  const DataBatch batch(Matrix::Ones(3, 2), Matrix::Ones(2, 2), Matrix::Ones(3, 2),
                        phi_ball(3, 2, 0.1));
  EXPECT_THROW(verify_data(batch, example1::spec(), example1::reference_gain(), 3.0, 10, 1),
               RankDeficientData);
}

TEST(VerifyData, WorstCaseDominatesEverySample) {
  const auto batch = example_batch(0.1, 20, 8);
  const auto spec = example1::spec();
  const Matrix k = example1::reference_gain();
  const auto rep = verify_data(batch, spec, k, 100.0, 40, 11);
  ASSERT_TRUE(rep.worst_case_h2 && rep.worst_case_h2->finite);
  auto plants = sample_consistent(batch, 20, SampleMode::Boundary, detail::mix_seed(11, 0));
  const auto inner = sample_consistent(batch, 20, SampleMode::Interior, detail::mix_seed(11, 1));
  plants.insert(plants.end(), inner.begin(), inner.end());
  for (const auto& p : plants) {
    const auto v = H2Value::of(p.A + p.B * k, spec.E, spec.C + spec.D * k);
    ASSERT_TRUE(v.finite);
    EXPECT_LE(v.value, rep.worst_case_h2->value);
  }
}

}  // namespace
