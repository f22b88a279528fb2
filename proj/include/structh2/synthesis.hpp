#pragma once

// Structured H2 state-feedback synthesis: model-based (one plant) and
// data-driven (every plant consistent with a noisy batch).
//
// All programs minimize g = γ² over (P, Q, R, L, g [, α, β, Λ]) and return
// K = L·R⁻¹. Strict inequalities are shifted by η·I.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "structh2/dataset.hpp"
#include "structh2/errors.hpp"
#include "structh2/linalg.hpp"
#include "structh2/lmi.hpp"
#include "structh2/sdp.hpp"
#include "structh2/subspace.hpp"

namespace structh2 {

struct PerformanceSpec {
  Matrix C;
  Matrix D;
  Matrix E;

  Index q() const { return C.rows(); }

  void validate(Index n, Index m) const {
    require_finite(C, "C");
    require_finite(D, "D");
    require_finite(E, "E");
    if (C.rows() < 1) throw DimensionMismatch("C must have at least one row");
    if (C.cols() != n || D.rows() != C.rows() || D.cols() != m || E.rows() != n ||
        E.cols() < 1) {
      throw DimensionMismatch("performance matrices do not match the plant dimensions");
    }
  }
};

enum class Design { D1, D2, D3, D4 };

inline const char* to_string(Design d) {
  switch (d) {
    case Design::D1:
      return "D1";
    case Design::D2:
      return "D2";
    case Design::D3:
      return "D3";
    case Design::D4:
      return "D4";
  }
  return "?";
}

inline Design parse_design(const std::string& s) {
  if (s == "D1" || s == "1") return Design::D1;
  if (s == "D2" || s == "2") return Design::D2;
  if (s == "D3" || s == "3") return Design::D3;
  if (s == "D4" || s == "4") return Design::D4;
  throw ParseError("unknown design '" + s + "' (expected D1, D2, D3 or D4)");
}

struct DesignOptions {
  Design design = Design::D1;
  std::optional<SubspaceSpec> subspace;
  bool sharing = false;
  double eta = 1e-3;
  std::optional<double> gamma;  // fixed γ: feasibility check only
  LambdaKind lambda_kind = LambdaKind::General;
  double beta_min = 1e-9;
  sdp::Options solver;
  std::function<void(const lmi::ConicForm&)> inspect;  // sees the compiled program
};

struct SynthesisResult {
  sdp::Status status = sdp::Status::NumericalTrouble;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  Matrix K, P, Q, R, L;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<std::string> warnings;
  int iterations = 0;
  double certificate_residual = std::numeric_limits<double>::quiet_NaN();
  std::string message;

  bool optimal() const { return status == sdp::Status::Optimal; }
};

constexpr double kStructureTol = 1e-6;

namespace detail {

using lmi::AffineExpr;
using lmi::LmiProblem;
using lmi::MatrixVar;

inline void check_options(const DesignOptions& opts, Index n, Index m) {
  if (opts.design != Design::D1 && !opts.subspace) {
    throw Error(std::string(to_string(opts.design)) + " requires a structure subspace");
  }
  if (opts.subspace && (opts.subspace->m() != m || opts.subspace->n() != n)) {
    throw DimensionMismatch("structure subspace shape differs from K (m x n)");
  }
  if (opts.sharing && m < 2) throw Error("sharing requires at least two inputs");
  if (!(opts.eta >= 0.0)) throw Error("eta must be nonnegative");
  if (opts.gamma && !(*opts.gamma > 0.0)) throw Error("fixed gamma must be positive");
}

inline Mask diagonal_mask(Index n) {
  Mask m = Mask::Constant(n, n, false);
  for (Index i = 0; i < n; ++i) m(i, i) = true;
  return m;
}

struct Variables {
  MatrixVar P, Q, R, L, g;
  AffineExpr p, q, r, l;
};

/// P, Q, R, L, g with the structural restrictions of the selected design.
inline Variables declare_common(LmiProblem& prob, Index n, Index m, Index q,
                                const DesignOptions& opts) {
  Variables v;
  v.Q = prob.symmetric(q);
  v.g = prob.scalar();
  const bool structured = opts.design != Design::D1;
  const auto& sub = opts.subspace;

  if (structured && sub->pattern()) {
    v.L = prob.rectangular(m, n, *sub->pattern());
  } else {
    v.L = prob.rectangular(m, n);
  }
  if (structured && !sub->pattern()) {
    // L = Σ θ_i S_i
    std::vector<MatrixVar> theta;
    for (Index i = 0; i < sub->k(); ++i) theta.push_back(prob.scalar());
    for (Index c = 0; c < n; ++c) {
      for (Index r = 0; r < m; ++r) {
        lmi::LinearEquation eq;
        eq.terms.emplace_back(v.L.index(r, c), 1.0);
        for (Index i = 0; i < sub->k(); ++i) {
          const double s = sub->basis()[static_cast<std::size_t>(i)](r, c);
          if (s != 0.0) eq.terms.emplace_back(theta[static_cast<std::size_t>(i)].index(0, 0), -s);
        }
        prob.add_equality(std::move(eq));
      }
    }
  }
  if (opts.sharing) {
    // 1ᵀL = 0
    for (Index c = 0; c < n; ++c) {
      lmi::LinearEquation eq;
      for (Index r = 0; r < m; ++r) {
        const int k = v.L.index(r, c);
        if (k >= 0) eq.terms.emplace_back(k, 1.0);
      }
      prob.add_equality(std::move(eq));
    }
  }
  v.l = lmi::expr(v.L);

  switch (opts.design) {
    case Design::D1:
      v.P = prob.symmetric(n);
      v.R = prob.rectangular(n, n);
      break;
    case Design::D2:
      v.R = prob.symmetric(n, diagonal_mask(n));
      v.P = v.R;
      break;
    case Design::D3:
      v.P = prob.symmetric(n);
      v.R = prob.rectangular(n, n, diagonal_mask(n));
      break;
    case Design::D4: {
      v.P = prob.symmetric(n);
      v.R = prob.rectangular(n, n);
      const auto ups = upsilon_constraints(*sub, opts.lambda_kind);
      const MatrixVar lambda = prob.rectangular(ups.k, ups.k);
      for (const auto& eq : ups.equations) {
        lmi::LinearEquation lin;
        for (const auto& t : eq) {
          const int idx = t.var == UpsilonTerm::Var::Q ? v.R.index(t.row, t.col)
                                                       : lambda.index(t.row, t.col);
          lin.terms.emplace_back(idx, t.coef);
        }
        prob.add_equality(std::move(lin));
      }
      break;
    }
  }
  v.p = lmi::expr(v.P);
  v.r = lmi::expr(v.R);
  v.q = lmi::expr(v.Q);
  return v;
}

/// Shared tail: [[Q, CR+DL],[·, R+Rᵀ−P]] ⪰ ηI, Tr Q ≤ g, P ⪰ ηI when
/// structured, objective.
inline void add_performance(LmiProblem& prob, const Variables& v, const PerformanceSpec& spec,
                            const DesignOptions& opts) {
  const AffineExpr inner = v.r + v.r.transpose() - v.p;
  const AffineExpr cr_dl = spec.C * v.r + spec.D * v.l;
  prob.add_psd(AffineExpr::blocks({{v.q, cr_dl}, {cr_dl.transpose(), inner}}), opts.eta,
               "performance");
  lmi::trace_leq(prob, v.Q, v.g);
  if (opts.design != Design::D1) prob.add_psd(v.p, opts.eta, "P");
  if (opts.gamma) {
    prob.add_equality(lmi::LinearEquation{{{v.g.index(0, 0), 1.0}}, (*opts.gamma) * (*opts.gamma)});
  } else {
    prob.minimize(lmi::expr(v.g));
  }
}

/// Decodes the solver output and forms K = L·R⁻¹.
inline SynthesisResult decode(const sdp::SolveReport& rep, const Variables& v,
                              const DesignOptions& opts) {
  SynthesisResult out;
  out.status = rep.status;
  out.iterations = rep.iterations;
  out.certificate_residual = rep.certificate_residual;
  out.message = rep.message;
  if (rep.status != sdp::Status::Optimal) return out;
  const Vector& x = rep.x;
  out.P = LmiProblem::value(v.P, x);
  out.Q = LmiProblem::value(v.Q, x);
  out.R = LmiProblem::value(v.R, x);
  out.L = LmiProblem::value(v.L, x);
  out.gamma = std::sqrt(std::max(0.0, x(v.g.index(0, 0))));
  const Matrix inner = out.R + out.R.transpose() - out.P;
  if (!(min_eig(SymMatrix(inner)) > 0.0)) {
    out.status = sdp::Status::NumericalTrouble;
    out.message = "R + R' - P is not positive definite at the returned point";
    return out;
  }
  const Eigen::FullPivLU<Matrix> lu(out.R.transpose());
  out.K = lu.solve(out.L.transpose()).transpose();
  if (opts.design != Design::D1) {
    const auto& sub = *opts.subspace;
    if (!contains(sub, out.K, kStructureTol)) {
      throw StructureViolation("decoded K leaves the structure subspace (distance " +
                               std::to_string(sub.distance(out.K)) + ")");
    }
    if (sub.pattern()) {
      out.K = (sub.pattern()->cast<double>() * out.K.array()).matrix();
    }
  }
  return out;
}

}  // namespace detail

/// Model-based design on a single plant.
inline SynthesisResult design_model(const PlantPair& plant, const PerformanceSpec& spec,
                                    const DesignOptions& opts) {
  plant.validate();
  spec.validate(plant.n(), plant.m());
  detail::check_options(opts, plant.n(), plant.m());
  const Index n = plant.n();
  lmi::LmiProblem prob;
  auto v = detail::declare_common(prob, n, plant.m(), spec.q(), opts);
  const Matrix eet = spec.E * spec.E.transpose();
  const lmi::AffineExpr inner = v.r + v.r.transpose() - v.p;
  const lmi::AffineExpr ar_bl = plant.A * v.r + plant.B * v.l;
  prob.add_psd(lmi::AffineExpr::blocks({{v.p - eet, ar_bl}, {ar_bl.transpose(), inner}}),
               opts.eta, "stability");
  detail::add_performance(prob, v, spec, opts);
  const auto form = prob.compile();
  if (opts.inspect) opts.inspect(form);
  const auto rep = sdp::solve(form, opts.solver);
  return detail::decode(rep, v, opts);
}

/// Smallest γ certified for a fixed gain: min Tr Q over P, Q, R subject to
/// the closed-loop inequalities with a tiny margin.
inline double certify_fixed_k(const PlantPair& plant, const PerformanceSpec& spec,
                              const Matrix& K, const sdp::Options& solver = {},
                              double margin = 1e-9) {
  plant.validate();
  spec.validate(plant.n(), plant.m());
  if (K.rows() != plant.m() || K.cols() != plant.n()) {
    throw DimensionMismatch("K must be m x n");
  }
  const Matrix acl = plant.A + plant.B * K;
  if (!(spectral_radius(acl) < 1.0)) {
    throw UnstableClosedLoop("closed loop is not Schur stable (spectral radius " +
                             std::to_string(spectral_radius(acl)) + ")");
  }
  const Index n = plant.n();
  const Matrix ccl = spec.C + spec.D * K;
  lmi::LmiProblem prob;
  const auto P = prob.symmetric(n);
  const auto Q = prob.symmetric(spec.q());
  const auto R = prob.rectangular(n, n);
  const auto g = prob.scalar();
  const auto p = lmi::expr(P);
  const auto r = lmi::expr(R);
  const auto inner = r + r.transpose() - p;
  const auto ar = acl * r;
  const auto cr = ccl * r;
  prob.add_psd(lmi::AffineExpr::blocks({{p - spec.E * spec.E.transpose(), ar}, {ar.transpose(), inner}}),
               margin, "stability");
  prob.add_psd(lmi::AffineExpr::blocks({{lmi::expr(Q), cr}, {cr.transpose(), inner}}), margin,
               "performance");
  lmi::trace_leq(prob, Q, g);
  prob.minimize(lmi::expr(g));
  const auto rep = sdp::solve(prob.compile(), solver);
  if (rep.status != sdp::Status::Optimal) {
    throw Error(std::string("fixed-gain certification failed: ") + sdp::to_string(rep.status) +
                (rep.message.empty() ? "" : " (" + rep.message + ")"));
  }
  return std::sqrt(std::max(0.0, rep.x(g.index(0, 0))));
}

namespace detail {

/// [[P − EEᵀ − βI, 0, 0, 0],[0,0,0,R],[0,0,0,L],[0,Rᵀ,Lᵀ,R+Rᵀ−P]] − α·blkdiag(Ψ, 0)
inline Matrix data_block_value(const Matrix& P, const Matrix& R, const Matrix& L, double alpha,
                               double beta, const Matrix& psi, const Matrix& E) {
  const Index n = P.rows();
  const Index m = L.rows();
  const Index d = 3 * n + m;
  Matrix out = Matrix::Zero(d, d);
  out.topLeftCorner(n, n) = P - E * E.transpose() - beta * Matrix::Identity(n, n);
  out.block(n, 2 * n + m, n, n) = R;
  out.block(2 * n, 2 * n + m, m, n) = L;
  out.block(2 * n + m, n, n, n) = R.transpose();
  out.block(2 * n + m, 2 * n, n, m) = L.transpose();
  out.bottomRightCorner(n, n) = R + R.transpose() - P;
  out.topLeftCorner(2 * n + m, 2 * n + m) -= alpha * psi;
  return out;
}

}  // namespace detail

/// Data-driven design: one controller with a γ bound valid for every plant
/// consistent with the batch.
inline SynthesisResult design_data(const DataBatch& batch, const PerformanceSpec& spec,
                                   const DesignOptions& opts) {
  const Index n = batch.n();
  const Index m = batch.m();
  spec.validate(n, m);
  detail::check_options(opts, n, m);
  lmi::LmiProblem prob;
  auto v = detail::declare_common(prob, n, m, spec.q(), opts);
  const auto alpha = prob.scalar();
  const auto beta = prob.scalar();
  const lmi::AffineExpr a = lmi::expr(alpha);
  const lmi::AffineExpr b = lmi::expr(beta);

  const Index d = 3 * n + m;
  const Matrix eet = spec.E * spec.E.transpose();
  const Matrix psi_ext = blkdiag(batch.psi().matrix(), Matrix::Zero(n, n));
  auto embed = [d](const lmi::AffineExpr& e, Index r0, Index c0) {
    const Matrix left = Matrix::Identity(d, d).middleCols(r0, e.rows());
    const Matrix right = Matrix::Identity(d, d).middleRows(c0, e.cols());
    return left * e * right;
  };
  lmi::AffineExpr block = lmi::AffineExpr::zeros(d, d);
  block += embed(v.p - eet - lmi::AffineExpr::scaled(b, Matrix::Identity(n, n)), 0, 0);
  block += embed(v.r, n, 2 * n + m);
  block += embed(v.r.transpose(), 2 * n + m, n);
  block += embed(v.l, 2 * n, 2 * n + m);
  block += embed(v.l.transpose(), 2 * n + m, 2 * n);
  block += embed(v.r + v.r.transpose() - v.p, 2 * n + m, 2 * n + m);
  block -= lmi::AffineExpr::scaled(a, psi_ext);
  prob.add_psd(block, opts.eta, "data");
  prob.add_psd(a, 0.0, "alpha");
  prob.add_psd(b, opts.beta_min, "beta");
  detail::add_performance(prob, v, spec, opts);

  const auto form = prob.compile();
  if (opts.inspect) opts.inspect(form);
  const auto rep = sdp::solve(form, opts.solver);
  auto out = detail::decode(rep, v, opts);
  if (!batch.full_rank()) {
    out.warnings.push_back("RankDeficientData: Psi22 is not negative definite");
  }
  if (rep.status == sdp::Status::Optimal) {
    out.alpha = rep.x(alpha.index(0, 0));
    out.beta = rep.x(beta.index(0, 0));
  }
  return out;
}

/// Lemma-form check [[P−EEᵀ−βI, 0],[0, −[R;L](R+Rᵀ−P)⁻¹[R;L]ᵀ]] − αΨ ⪰ 0.
inline bool slemma_holds(const Matrix& P, const Matrix& R, const Matrix& L, double alpha,
                         double beta, const Matrix& psi, const Matrix& E, double tol = 1e-7) {
  const Index n = P.rows();
  const Index m = L.rows();
  if (R.rows() != n || R.cols() != n || L.cols() != n || E.rows() != n ||
      psi.rows() != 2 * n + m || psi.cols() != 2 * n + m) {
    throw DimensionMismatch("slemma_holds: inconsistent dimensions");
  }
  const Matrix inner = R + R.transpose() - P;
  if (!(min_eig(SymMatrix(inner)) > 0.0)) {
    throw SingularInnerBlock("R + R' - P is not positive definite");
  }
  Matrix rl(n + m, n);
  rl << R, L;
  Matrix m_full = Matrix::Zero(2 * n + m, 2 * n + m);
  m_full.topLeftCorner(n, n) = P - E * E.transpose() - beta * Matrix::Identity(n, n);
  m_full.bottomRightCorner(n + m, n + m) = -rl * inner.ldlt().solve(rl.transpose());
  m_full -= alpha * psi;
  return min_eig(SymMatrix(m_full)) >= -tol;
}

/// min_eig of the per-plant stability block [[P−EEᵀ, AR+BL],[·, R+Rᵀ−P]].
inline double model_block_margin(const PlantPair& plant, const Matrix& E, const Matrix& P,
                                 const Matrix& R, const Matrix& L) {
  const Index n = plant.n();
  Matrix blk(2 * n, 2 * n);
  const Matrix off = plant.A * R + plant.B * L;
  blk << P - E * E.transpose(), off, off.transpose(), R + R.transpose() - P;
  return min_eig(SymMatrix(blk));
}

}  // namespace structh2
