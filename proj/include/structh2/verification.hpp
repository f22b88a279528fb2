#pragma once

// Post-hoc checks of a gain K against a single plant or against plants
// sampled from the consistency set of a batch.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "structh2/dataset.hpp"
#include "structh2/linalg.hpp"
#include "structh2/subspace.hpp"
#include "structh2/synthesis.hpp"

namespace structh2 {

/// H2 norm with an explicit flag instead of an overflowing value.
struct H2Value {
  bool finite = false;
  double value = std::numeric_limits<double>::infinity();

  static H2Value of(const Matrix& acl, const Matrix& e, const Matrix& ccl) {
    if (!(spectral_radius(acl) < 1.0)) return {};
    try {
      return {true, h2_norm(acl, e, ccl)};
    } catch (const UnstableMatrix&) {
      return {};
    }
  }
};

struct VerificationReport {
  bool stable = false;
  H2Value h2;
  bool structure_ok = true;
  bool sharing_ok = true;
  std::optional<double> gamma;
  std::optional<H2Value> worst_case_h2;
  std::size_t samples_checked = 0;
  std::optional<double> true_plant_margin;
  std::vector<std::string> violations;

  bool passed() const { return violations.empty(); }
};

namespace detail {

inline void check_gain_structure(VerificationReport& rep, const Matrix& K,
                                 const std::optional<SubspaceSpec>& subspace, bool sharing) {
  if (subspace) {
    rep.structure_ok = contains(*subspace, K, kStructureTol);
    if (!rep.structure_ok) rep.violations.push_back("K is outside the structure subspace");
  }
  if (sharing) {
    rep.sharing_ok = K.colwise().sum().cwiseAbs().maxCoeff() <= kStructureTol;
    if (!rep.sharing_ok) rep.violations.push_back("column sums of K are not zero");
  }
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

inline VerificationReport verify_model(const PlantPair& plant, const PerformanceSpec& spec,
                                       const Matrix& K,
                                       const std::optional<SubspaceSpec>& subspace = std::nullopt,
                                       bool sharing = false) {
  plant.validate();
  spec.validate(plant.n(), plant.m());
  if (K.rows() != plant.m() || K.cols() != plant.n()) throw DimensionMismatch("K must be m x n");
  VerificationReport rep;
  const Matrix acl = plant.A + plant.B * K;
  rep.stable = spectral_radius(acl) < 1.0;
  rep.h2 = H2Value::of(acl, spec.E, spec.C + spec.D * K);
  if (!rep.stable) rep.violations.push_back("closed loop is unstable");
  detail::check_gain_structure(rep, K, subspace, sharing);
  return rep;
}

/// Half boundary, half interior samples of the consistency set; a sample
/// violates if it is not stabilized or its H2 norm exceeds γ(1 + 1e-4).
inline VerificationReport verify_data(const DataBatch& batch, const PerformanceSpec& spec,
                                      const Matrix& K, double gamma, std::size_t samples,
                                      std::uint64_t seed,
                                      const std::optional<SubspaceSpec>& subspace = std::nullopt,
                                      bool sharing = false,
                                      const std::optional<PlantPair>& truth = std::nullopt) {
  spec.validate(batch.n(), batch.m());
  if (K.rows() != batch.m() || K.cols() != batch.n()) throw DimensionMismatch("K must be m x n");
  if (!batch.full_rank()) throw RankDeficientData("data matrix [X-; U-] does not have full row rank");
  VerificationReport rep;
  rep.gamma = gamma;
  const double bound = gamma * (1.0 + 1e-4);
  const Matrix ccl = spec.C + spec.D * K;

  const PlantPair nominal = truth ? *truth : ConsistencySet(batch).center_plant();
  const Matrix acl0 = nominal.A + nominal.B * K;
  rep.stable = spectral_radius(acl0) < 1.0;
  rep.h2 = H2Value::of(acl0, spec.E, ccl);
  if (truth) {
    rep.true_plant_margin = consistency(batch, *truth);
    if (!rep.stable) rep.violations.push_back("true plant is not stabilized");
  }
  detail::check_gain_structure(rep, K, subspace, sharing);

  if (samples > 0) {
    const std::size_t boundary = samples - samples / 2;
    auto plants = sample_consistent(batch, boundary, SampleMode::Boundary, detail::mix_seed(seed, 0));
    auto inner = sample_consistent(batch, samples / 2, SampleMode::Interior, detail::mix_seed(seed, 1));
    plants.insert(plants.end(), inner.begin(), inner.end());
    H2Value worst{true, 0.0};
    for (std::size_t i = 0; i < plants.size(); ++i) {
      const H2Value v = H2Value::of(plants[i].A + plants[i].B * K, spec.E, ccl);
      if (!v.finite) {
        worst = v;
        rep.violations.push_back("sample " + std::to_string(i) + " is not stabilized");
        continue;
      }
      if (worst.finite) worst.value = std::max(worst.value, v.value);
      if (v.value > bound) {
        rep.violations.push_back("sample " + std::to_string(i) + " has H2 norm " +
                                 std::to_string(v.value) + " above " + std::to_string(gamma));
      }
    }
    rep.worst_case_h2 = worst;
    rep.samples_checked = plants.size();
  }
  return rep;
}

inline nlohmann::ordered_json to_json(const H2Value& v) {
  return v.finite ? nlohmann::ordered_json(v.value) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json to_json(const VerificationReport& rep) {
  nlohmann::ordered_json j;
  j["passed"] = rep.passed();
  j["stable"] = rep.stable;
  j["h2"] = to_json(rep.h2);
  j["h2_infinite"] = !rep.h2.finite;
  j["structure_ok"] = rep.structure_ok;
  j["sharing_ok"] = rep.sharing_ok;
  j["gamma"] = rep.gamma ? nlohmann::ordered_json(*rep.gamma) : nlohmann::ordered_json(nullptr);
  if (rep.worst_case_h2) {
    j["worst_case_h2"] = to_json(*rep.worst_case_h2);
    j["worst_case_h2_infinite"] = !rep.worst_case_h2->finite;
  } else {
    j["worst_case_h2"] = nullptr;
  }
  j["samples_checked"] = rep.samples_checked;
  if (rep.true_plant_margin) j["true_plant_margin"] = *rep.true_plant_margin;
  j["violations"] = rep.violations;
  return j;
}

}  // namespace structh2
