// Example 1 end to end: model-based designs, then a data-driven Design 4
// from a simulated batch, then a sampling check of the certificate.

#include <iomanip>
#include <iostream>

#include "structh2/structh2.hpp"

using namespace structh2;

int main() {
  const PlantPair plant = example1::plant();
  const PerformanceSpec spec = example1::spec();

  std::cout << "model-based\n";
  for (Design d : {Design::D1, Design::D2, Design::D3, Design::D4}) {
    DesignOptions opts;
    opts.design = d;
    opts.subspace = example1::subspace();
    const auto r = design_model(plant, spec, opts);
    std::cout << "  " << to_string(d) << "  gamma = " << std::fixed << std::setprecision(4)
              << r.gamma << "\n";
  }

  const Matrix u = uniform_inputs(plant.m(), 20, 3.0, 7);
  const auto sim = simulate(plant, example1::x0(), u, 0.1, 7);
  DesignOptions opts;
  opts.design = Design::D4;
  opts.subspace = example1::subspace();
  const auto r = design_data(sim.batch, spec, opts);
  std::cout << "\ndata-driven D4 (T = 20, eps = 0.1): " << sdp::to_string(r.status) << "\n";
  if (!r.optimal()) return 0;
  std::cout << "  gamma = " << r.gamma << "  alpha = " << std::scientific << std::setprecision(3)
            << r.alpha << "  beta = " << r.beta << "\n"
            << std::fixed << std::setprecision(4) << "  K =\n" << r.K << "\n";

  const auto rep = verify_data(sim.batch, spec, r.K, r.gamma, 200, 11, example1::subspace(),
                               false, plant);
  std::cout << "  true plant H2 = " << rep.h2.value << "\n"
            << "  worst sampled H2 = " << rep.worst_case_h2->value << " over "
            << rep.samples_checked << " plants, violations: " << rep.violations.size() << "\n";
}
