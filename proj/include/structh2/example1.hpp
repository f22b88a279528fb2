#pragma once

// Builtin benchmark: 3 states, 2 inputs, K restricted to the pattern
// [[1,1,0],[0,1,1]], y = [x; u], unit process noise.

#include "structh2/dataset.hpp"
#include "structh2/subspace.hpp"
#include "structh2/synthesis.hpp"

namespace structh2::example1 {

inline PlantPair plant() {
  Matrix a(3, 3);
  a << -0.4095, 0.4036, -0.0874,
       0.5154, -0.0815, 0.1069,
       1.6715, 0.7718, -0.3376;
  Matrix b(3, 2);
  b << 0.0, 0.0,
       -0.6359, -0.1098,
       -0.0325, 2.2795;
  return {a, b};
}

inline PerformanceSpec spec() {
  PerformanceSpec s;
  s.C = Matrix::Zero(5, 3);
  s.C.topRows(3).setIdentity();
  s.D = Matrix::Zero(5, 2);
  s.D.bottomRows(2).setIdentity();
  s.E = Matrix::Identity(3, 3);
  return s;
}

inline Mask pattern() {
  Mask m(2, 3);
  m << true, true, false,
       false, true, true;
  return m;
}

inline SubspaceSpec subspace() { return SubspaceSpec::from_pattern(pattern()); }

inline Vector x0() { return Vector::Unit(3, 0); }

/// Gain printed for Design 4 with T = 6.
inline Matrix reference_gain() {
  Matrix k(2, 3);
  k << 0.5359, 0.1875, 0.0,
       0.0, -0.6245, 0.2226;
  return k;
}

}  // namespace structh2::example1
