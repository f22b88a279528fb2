#pragma once

// Semidefinite programming backend for lmi::ConicForm.
//
//   primal:  minimize cᵀx   s.t. A x = b,  G x + s = h,  s ∈ K
//   dual:    maximize −hᵀz − bᵀy  s.t. Gᵀz + Aᵀy + c = 0,  z ∈ K
//
// Equalities are removed first (x = x0 + N w) with a sparsity-preserving
// presolve followed by a dense null-space computation on whatever is left.
// The reduced problem is solved with a homogeneous self-dual embedding,
// Nesterov–Todd scaling and a Mehrotra predictor-corrector, so infeasibility
// is detected from the iterates themselves: an infeasible LMI comes back with
// a dual improving ray z ⪰ 0, Gᵀz ∈ range(Aᵀ), hᵀz + bᵀy < 0.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "structh2/errors.hpp"
#include "structh2/linalg.hpp"
#include "structh2/lmi.hpp"

namespace structh2::sdp {

using lmi::ConicForm;
using lmi::SparseMatrix;
using lmi::Triplet;

enum class Status { Optimal, Infeasible, Unbounded, NumericalTrouble };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal:
      return "Optimal";
    case Status::Infeasible:
      return "Infeasible";
    case Status::Unbounded:
      return "Unbounded";
    case Status::NumericalTrouble:
      return "NumericalTrouble";
  }
  return "?";
}

struct Options {
  double tol_feas = 1e-8;
  double tol_gap = 1e-7;
  int max_iter = 200;
  double step_fraction = 0.98;
  bool verbose = false;  // per-iteration trace on stderr
};

struct Residuals {
  double feas = 0.0;  // max of scaled primal and dual residuals
  double gap = 0.0;   // relative duality gap
};

struct SolveReport {
  Status status = Status::NumericalTrouble;
  Vector x;  // primal variables (Optimal), or the improving ray (Unbounded)
  Vector s;  // primal slack in svec form
  Vector z;  // dual in svec form; for Infeasible the ray normalized so that hᵀz + bᵀy = −1
  Vector y;  // equality multipliers of the infeasibility ray
  double primal_objective = std::numeric_limits<double>::quiet_NaN();
  double dual_objective = std::numeric_limits<double>::quiet_NaN();
  Residuals residuals;
  double certificate_residual = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  std::string message;
};

namespace detail {

/// x = x0 + N w, plus rows that determine auxiliary variables (variables
/// that occur in neither the cone nor the objective) after the solve.
struct Reduction {
  bool inconsistent = false;
  Vector x0;
  SparseMatrix N;
  std::vector<std::pair<int, int>> recover;  // (equation row, variable), in elimination order
};

inline Reduction reduce_equalities(const ConicForm& f) {
  const int p = static_cast<int>(f.num_vars);
  const int rows = static_cast<int>(f.A.rows());
  Reduction red;
  red.x0 = Vector::Zero(p);

  // Row-wise copy of A.
  std::vector<std::vector<std::pair<int, double>>> row_terms(rows);
  for (int k = 0; k < f.A.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(f.A, k); it; ++it) {
      if (it.value() != 0.0) row_terms[it.row()].emplace_back(static_cast<int>(it.col()), it.value());
    }
  }
  Vector b = f.b;
  std::vector<bool> row_active(rows, true);

  std::vector<int> g_count(p, 0);
  for (int k = 0; k < f.G.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(f.G, k); it; ++it) {
      if (it.value() != 0.0) ++g_count[it.col()];
    }
  }
  std::vector<bool> aux(p, false);
  for (int j = 0; j < p; ++j) aux[j] = g_count[j] == 0 && f.c(j) == 0.0;

  enum class VarState { Free, Fixed, Recovered };
  std::vector<VarState> state(p, VarState::Free);

  std::vector<std::vector<int>> col_rows(p);
  for (int r = 0; r < rows; ++r) {
    for (const auto& [j, v] : row_terms[r]) col_rows[j].push_back(r);
  }
  auto active_count = [&](int j) {
    int cnt = 0;
    for (int r : col_rows[j]) cnt += row_active[r] ? 1 : 0;
    return cnt;
  };
  auto live_terms = [&](int r) {
    std::vector<std::pair<int, double>> out;
    for (const auto& t : row_terms[r]) {
      if (state[t.first] == VarState::Free) out.push_back(t);
    }
    return out;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    // Auxiliary variable occurring in exactly one live row: the row only
    // determines that variable, drop both.
    for (int j = 0; j < p; ++j) {
      if (!aux[j] || state[j] != VarState::Free) continue;
      if (active_count(j) != 1) continue;
      for (int r : col_rows[j]) {
        if (!row_active[r]) continue;
        row_active[r] = false;
        state[j] = VarState::Recovered;
        red.recover.emplace_back(r, j);
        changed = true;
        break;
      }
    }
    // Singleton rows fix their variable.
    for (int r = 0; r < rows; ++r) {
      if (!row_active[r]) continue;
      const auto live = live_terms(r);
      if (live.size() != 1) continue;
      const auto [j, a] = live.front();
      double rhs = b(r);
      for (const auto& [jj, v] : row_terms[r]) {
        if (jj != j && state[jj] == VarState::Fixed) rhs -= v * red.x0(jj);
      }
      red.x0(j) = rhs / a;
      state[j] = VarState::Fixed;
      row_active[r] = false;
      changed = true;
    }
  }

  // Effective right-hand sides of the remaining rows once fixed variables are
  // substituted.
  std::vector<int> live_rows;
  std::vector<int> live_cols;
  std::vector<int> col_pos(p, -1);
  for (int r = 0; r < rows; ++r) {
    if (!row_active[r]) continue;
    const auto live = live_terms(r);
    double rhs = b(r);
    for (const auto& [jj, v] : row_terms[r]) {
      if (state[jj] == VarState::Fixed) rhs -= v * red.x0(jj);
    }
    if (live.empty()) {
      if (std::abs(rhs) > 1e-9 * (1.0 + std::abs(b(r)))) red.inconsistent = true;
      continue;
    }
    live_rows.push_back(r);
    for (const auto& [j, v] : live) {
      if (col_pos[j] < 0) {
        col_pos[j] = static_cast<int>(live_cols.size());
        live_cols.push_back(j);
      }
    }
  }

  std::vector<Triplet> nt;
  int next = 0;
  for (int j = 0; j < p; ++j) {
    if (state[j] == VarState::Free && col_pos[j] < 0 && !aux[j]) {
      nt.emplace_back(j, next++, 1.0);
    }
  }

  if (!live_rows.empty()) {
    const Index nr = static_cast<Index>(live_rows.size());
    const Index nc = static_cast<Index>(live_cols.size());
    Matrix aj = Matrix::Zero(nr, nc);
    Vector bj(nr);
    for (Index i = 0; i < nr; ++i) {
      const int r = live_rows[static_cast<std::size_t>(i)];
      double rhs = b(r);
      for (const auto& [jj, v] : row_terms[r]) {
        if (state[jj] == VarState::Fixed) {
          rhs -= v * red.x0(jj);
        } else if (state[jj] == VarState::Free) {
          aj(i, col_pos[jj]) += v;
        }
      }
      bj(i) = rhs;
    }
    Eigen::FullPivLU<Matrix> lu(aj);
    lu.setThreshold(1e-11);
    const Vector xp = lu.solve(bj);
    if ((aj * xp - bj).norm() > 1e-9 * (1.0 + bj.norm())) red.inconsistent = true;
    for (Index i = 0; i < nc; ++i) red.x0(live_cols[static_cast<std::size_t>(i)]) = xp(i);
    if (lu.dimensionOfKernel() > 0) {
      const Matrix ker = lu.kernel();
      for (Index c = 0; c < ker.cols(); ++c) {
        for (Index i = 0; i < nc; ++i) {
          if (std::abs(ker(i, c)) > 1e-14) {
            nt.emplace_back(live_cols[static_cast<std::size_t>(i)], next, ker(i, c));
          }
        }
        ++next;
      }
    }
  }
  red.N.resize(p, next);
  red.N.setFromTriplets(nt.begin(), nt.end());
  return red;
}

/// Drops directions of N that move neither the cone image nor the objective
/// (they only change auxiliary variables, which are recovered afterwards).
inline void prune_inert_directions(const ConicForm& f, Reduction& red) {
  const Matrix gn = Matrix(f.G * red.N);
  const Vector cn = red.N.transpose() * f.c;
  bool any_zero = false;
  for (Index j = 0; j < gn.cols(); ++j) {
    if (gn.col(j).squaredNorm() + cn(j) * cn(j) == 0.0) any_zero = true;
  }
  // Dependent directions can hide inside mixed columns; test the rank.
  Matrix stacked(gn.rows() + 1, gn.cols());
  stacked << gn, cn.transpose();
  Eigen::JacobiSVD<Matrix> svd(stacked, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double cut = 1e-12 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) rank += sv(i) > cut ? 1 : 0;
  if (rank == gn.cols() && !any_zero) return;
  const Matrix keep = svd.matrixV().leftCols(rank);
  const Matrix dense = Matrix(red.N) * keep;
  red.N = dense.sparseView(1.0, 1e-15);
}

/// Per-column sparse entries of G grouped by cone block, as full-matrix
/// coordinates (row ≥ col) with the svec scaling undone.
struct BlockEntry {
  int block;
  int i;
  int j;
  double value;
};

struct ConeLayout {
  std::vector<Index> dims;
  std::vector<Index> offsets;
  std::vector<std::pair<int, std::pair<int, int>>> coords;  // svec row -> (block, (i, j))
  Index total = 0;

  explicit ConeLayout(const std::vector<Index>& d) : dims(d) {
    for (std::size_t b = 0; b < dims.size(); ++b) {
      offsets.push_back(total);
      const Index dim = dims[b];
      for (Index j = 0; j < dim; ++j) {
        for (Index i = j; i < dim; ++i) {
          coords.push_back({static_cast<int>(b), {static_cast<int>(i), static_cast<int>(j)}});
        }
      }
      total += lmi::svec_size(dim);
    }
  }

  Matrix block_matrix(const Vector& v, std::size_t b) const {
    return lmi::smat(v.segment(offsets[b], lmi::svec_size(dims[b])), dims[b]);
  }

  void set_block(Vector& v, std::size_t b, const Matrix& m) const {
    v.segment(offsets[b], lmi::svec_size(dims[b])) = lmi::svec(m);
  }

  Vector identity() const {
    Vector e = Vector::Zero(total);
    for (std::size_t b = 0; b < dims.size(); ++b) {
      set_block(e, b, Matrix::Identity(dims[b], dims[b]));
    }
    return e;
  }

  double min_eig(const Vector& v) const {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < dims.size(); ++b) {
      lo = std::min(lo, structh2::min_eig(SymMatrix(block_matrix(v, b))));
    }
    return lo;
  }
};

/// Nesterov–Todd scaling of one PSD block: Rᵀ Z R = R⁻¹ S R⁻ᵀ = diag(λ).
struct BlockScaling {
  Matrix r;       // R
  Matrix r_invt;  // R⁻ᵀ
  Vector lambda;
};

/// Any factor F with F Fᵀ = M for a positive definite M.
inline bool factor(const Matrix& m, Matrix& out) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success) {
    out = llt.matrixL();
    if (out.diagonal().minCoeff() > 0.0) return true;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  const Vector ev = es.eigenvalues();
  if (!(ev.minCoeff() > 0.0)) return false;
  out = es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
  return true;
}

/// Scaling from factors S = Ls Lsᵀ, Z = Lz Lzᵀ.
inline bool scaling_from_factors(const Matrix& ls, const Matrix& lz, BlockScaling& out) {
  Eigen::JacobiSVD<Matrix> svd(lz.transpose() * ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector lam = svd.singularValues();
  if (!(lam.minCoeff() > 0.0)) return false;
  const Vector inv_sqrt = lam.cwiseSqrt().cwiseInverse();
  out.r = ls * svd.matrixV() * inv_sqrt.asDiagonal();
  out.r_invt = lz * svd.matrixU() * inv_sqrt.asDiagonal();
  out.lambda = lam;
  return true;
}

inline double max_step_block(const Vector& lambda, const Matrix& d) {
  const Vector is = lambda.cwiseSqrt().cwiseInverse();
  const Matrix m = is.asDiagonal() * d * is.asDiagonal();
  const double lo = structh2::min_eig(SymMatrix(m));
  return lo < 0.0 ? -1.0 / lo : std::numeric_limits<double>::infinity();
}

/// Jordan product X∘Y = (XY + YX)/2.
inline Matrix jordan(const Matrix& x, const Matrix& y) {
  return 0.5 * (x * y + y * x);
}

/// Solves Λ∘X = M for diagonal Λ.
inline Matrix jordan_solve_diag(const Vector& lambda, const Matrix& m) {
  Matrix x(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) x(i, j) = 2.0 * m(i, j) / (lambda(i) + lambda(j));
  }
  return x;
}

/// Homogeneous self-dual interior-point method on min cᵀx s.t. Gx + s = h.
class HsdSolver {
 public:
  HsdSolver(const SparseMatrix& g, const Vector& h, const Vector& c,
            const std::vector<Index>& dims, const Options& opts)
      : g_(g), h_(h), c_(c), cone_(dims), opts_(opts) {
    p_ = g_.cols();
    nu_ = 0.0;
    for (Index d : dims) nu_ += static_cast<double>(d);
    // Column entries grouped by block.
    col_entries_.resize(static_cast<std::size_t>(p_));
    for (int k = 0; k < g_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(g_, k); it; ++it) {
        const auto& [blk, ij] = cone_.coords[static_cast<std::size_t>(it.row())];
        const double v = ij.first == ij.second ? it.value() : it.value() / lmi::kSqrt2;
        col_entries_[static_cast<std::size_t>(it.col())].push_back({blk, ij.first, ij.second, v});
      }
    }
  }

  struct Result {
    Status status = Status::NumericalTrouble;
    Vector x, s, z;
    double tau = 0.0;
    double kappa = 0.0;
    int iterations = 0;
    Residuals residuals;
    double certificate_residual = std::numeric_limits<double>::quiet_NaN();
    std::string message;
  };

  Result run() {
    constexpr int kRefinePasses = 4;
    Result res;
    const Index nb = static_cast<Index>(cone_.dims.size());
    const double resx0 = std::max(1.0, c_.norm());
    const double resz0 = std::max(1.0, h_.norm());

    // Starting point: least-norm primal/dual points pushed into the cone.
    Vector x, s, z;
    {
      const Matrix gd = Matrix(g_);
      Matrix h0 = gd.transpose() * gd;
      h0.diagonal().array() += 1e-12 * std::max(1.0, h0.diagonal().maxCoeff());
      Eigen::LDLT<Matrix> f0(h0);
      x = f0.solve(gd.transpose() * h_);
      s = h_ - gd * x;
      z = -(gd * f0.solve(c_));
      const Vector e = cone_.identity();
      const double ts = -cone_.min_eig(s);
      if (ts >= -1e-8 * std::max(1.0, s.norm())) s += (1.0 + ts) * e;
      const double tz = -cone_.min_eig(z);
      if (tz >= -1e-8 * std::max(1.0, z.norm())) z += (1.0 + tz) * e;
    }
    double tau = 1.0;
    double kappa = 1.0;

    std::vector<BlockScaling> w(static_cast<std::size_t>(nb));
    for (Index b = 0; b < nb; ++b) {
      Matrix ls, lz;
      if (!factor(cone_.block_matrix(s, static_cast<std::size_t>(b)), ls) ||
          !factor(cone_.block_matrix(z, static_cast<std::size_t>(b)), lz) ||
          !scaling_from_factors(ls, lz, w[static_cast<std::size_t>(b)])) {
        res.message = "initial scaling failed";
        return res;
      }
    }

    int stalls = 0;
    for (int iter = 0;; ++iter) {
      res.iterations = iter;
      // Residuals of the embedding.
      const Vector gtz = g_.transpose() * z;
      const Vector gx = g_ * x;
      const Vector rx = gtz + c_ * tau;
      const Vector rz = gx + s - h_ * tau;
      const double cx = c_.dot(x);
      const double hz = h_.dot(z);
      const double rt = kappa + cx + hz;
      const double sz = s.dot(z);
      const double mu = (sz + tau * kappa) / (nu_ + 1.0);

      const double pres = rz.norm() / tau / resz0;
      const double dres = rx.norm() / tau / resx0;
      const double pcost = cx / tau;
      const double dcost = -hz / tau;
      const double gap = sz / (tau * tau);
      const double relgap =
          std::max(gap, std::abs(pcost - dcost)) / std::max(1.0, std::abs(pcost + objective_offset));
      res.residuals = {std::max(pres, dres), relgap};
      if (opts_.verbose) {
        std::fprintf(stderr, "%3d  pcost %+.8e  dcost %+.8e  gap %.2e  pres %.2e  dres %.2e  tau %.2e  kappa %.2e\n",
                     iter, pcost, dcost, gap, pres, dres, tau, kappa);
      }

      if (pres <= opts_.tol_feas && dres <= opts_.tol_feas && relgap <= opts_.tol_gap) {
        res.status = Status::Optimal;
        res.x = x / tau;
        res.s = s / tau;
        res.z = z / tau;
        res.tau = tau;
        res.kappa = kappa;
        return res;
      }
      if (hz < 0.0) {
        const double pinf = (g_.transpose() * z).norm() / (-hz);
        if (pinf <= opts_.tol_feas) {
          res.status = Status::Infeasible;
          res.z = z / (-hz);
          res.certificate_residual = pinf;
          res.tau = tau;
          res.kappa = kappa;
          return res;
        }
      }
      if (cx < 0.0) {
        const double dinf = (gx + s).norm() / (-cx);
        if (dinf <= opts_.tol_feas) {
          res.status = Status::Unbounded;
          res.x = x / (-cx);
          res.s = s / (-cx);
          res.certificate_residual = dinf;
          return res;
        }
      }
      if (iter >= opts_.max_iter) {
        res.message = "iteration limit reached";
        return res;
      }

      // Scaled constraint matrix G̃ (columns svec(R⁻¹ G_i R⁻ᵀ)) and H = G̃ᵀG̃.
      std::vector<Matrix> r_inv(static_cast<std::size_t>(nb));
      for (Index b = 0; b < nb; ++b) {
        r_inv[static_cast<std::size_t>(b)] = w[static_cast<std::size_t>(b)].r_invt.transpose();
      }
      Matrix gs = Matrix::Zero(cone_.total, p_);
      {
        std::vector<Matrix> acc(static_cast<std::size_t>(nb));
        std::vector<bool> touched(static_cast<std::size_t>(nb));
        for (Index col = 0; col < p_; ++col) {
          std::fill(touched.begin(), touched.end(), false);
          for (const auto& e : col_entries_[static_cast<std::size_t>(col)]) {
            const auto bb = static_cast<std::size_t>(e.block);
            const Matrix& ri = r_inv[bb];
            if (!touched[bb]) {
              acc[bb] = Matrix::Zero(cone_.dims[bb], cone_.dims[bb]);
              touched[bb] = true;
            }
            if (e.i == e.j) {
              acc[bb].noalias() += e.value * ri.col(e.i) * ri.col(e.i).transpose();
            } else {
              const Matrix outer = ri.col(e.i) * ri.col(e.j).transpose();
              acc[bb] += e.value * (outer + outer.transpose());
            }
          }
          for (std::size_t bb = 0; bb < static_cast<std::size_t>(nb); ++bb) {
            if (!touched[bb]) continue;
            gs.col(col).segment(cone_.offsets[bb], lmi::svec_size(cone_.dims[bb])) =
                lmi::svec(acc[bb]);
          }
        }
      }
      // Both a pivoted QR of G̃ and the normal matrix; each Newton solve keeps
      // whichever refines to the smaller residual.
      Eigen::ColPivHouseholderQR<Matrix> qr(gs);
      const bool have_qr = qr.rank() == p_;
      Matrix r_upper;
      if (have_qr) r_upper = qr.matrixQR().topRows(p_).triangularView<Eigen::Upper>();
      Matrix hmat = gs.transpose() * gs;
      hmat.diagonal().array() += 1e-13 * std::max(1.0, hmat.diagonal().maxCoeff());
      Eigen::LLT<Matrix> llt(hmat);
      const bool have_llt = llt.info() == Eigen::Success;
      if (!have_qr && !have_llt) {
        res.message = "normal matrix factorization failed";
        return res;
      }

      auto scale_vec = [&](const Vector& v) {  // R⁻¹ V R⁻ᵀ per block
        Vector out(cone_.total);
        for (Index b = 0; b < nb; ++b) {
          const auto bb = static_cast<std::size_t>(b);
          const Matrix& ri = r_inv[bb];
          cone_.set_block(out, bb, ri * cone_.block_matrix(v, bb) * ri.transpose());
        }
        return out;
      };
      const Vector h_scaled = scale_vec(h_);

      // K [dx; dz̃] for right-hand sides (bx, r̃): dx = H⁻¹(bx + G̃ᵀr̃), dz̃ = G̃dx − r̃.
      auto kkt = [&](bool use_qr, const Vector& bx, const Vector& rr, Vector& dx, Vector& dzs) {
        if (use_qr) {
          // G̃Π = QR:  dx = Π R⁻¹ (R⁻ᵀ Πᵀ bx + Q₁ᵀ rr)
          Vector y = qr.colsPermutation().transpose() * bx;
          r_upper.transpose().triangularView<Eigen::Lower>().solveInPlace(y);
          const Vector qtr = (qr.householderQ().transpose() * rr).head(p_);
          Vector t = y + qtr;
          r_upper.triangularView<Eigen::Upper>().solveInPlace(t);
          dx = qr.colsPermutation() * t;
        } else {
          dx = llt.solve(bx + gs.transpose() * rr);
        }
        dzs = gs * dx - rr;
      };
      struct Fixed {
        Vector dx2, dz2;
        double denom = 0.0;
      };
      Fixed fixed[2];  // [0] normal matrix, [1] QR
      for (int k = 0; k < 2; ++k) {
        if (!(k == 1 ? have_qr : have_llt)) continue;
        kkt(k == 1, -c_, h_scaled, fixed[k].dx2, fixed[k].dz2);
        fixed[k].denom = c_.dot(fixed[k].dx2) + h_scaled.dot(fixed[k].dz2) - kappa / tau;
      }

      Vector lam_vec(cone_.total);
      for (Index b = 0; b < nb; ++b) {
        const auto bb = static_cast<std::size_t>(b);
        cone_.set_block(lam_vec, bb, Matrix(w[bb].lambda.asDiagonal()));
      }

      auto unscale = [&](const Vector& v, bool primal) {  // R V Rᵀ or R⁻ᵀ V R⁻¹
        Vector out(cone_.total);
        for (Index b = 0; b < nb; ++b) {
          const auto bb = static_cast<std::size_t>(b);
          const Matrix& f = primal ? w[bb].r : w[bb].r_invt;
          cone_.set_block(out, bb, f * cone_.block_matrix(v, bb) * f.transpose());
        }
        return out;
      };

      struct Direction {
        Vector dx, dzs, dss, dz, ds;
        double dtau = 0.0, dkappa = 0.0;
      };
      // Newton system
      //   Gᵀdz + c dτ = bx,  G dx + ds − h dτ = bz,  dκ + cᵀdx + hᵀdz = bt,
      //   ds̃ + dz̃ = D,  τ dκ + κ dτ = rk,
      // followed by refinement on the unscaled residuals.
      auto newton = [&](bool use_qr, const Vector& bx, const Vector& bz, double bt,
                        const Vector& d_scaled, double rk, double& err_out) {
        const Fixed& f = fixed[use_qr ? 1 : 0];
        const Vector& dx2 = f.dx2;
        const Vector& dz2 = f.dz2;
        const double denom = f.denom;
        auto raw = [&](const Vector& rbx, const Vector& rbz, double rbt, const Vector& dd,
                       double rrk) {
          Direction dir;
          Vector dx1, dz1;
          kkt(use_qr, rbx, scale_vec(rbz) - dd, dx1, dz1);
          dir.dtau = (rbt - rrk / tau - c_.dot(dx1) - h_scaled.dot(dz1)) / denom;
          dir.dx = dx1 + dir.dtau * dx2;
          dir.dzs = dz1 + dir.dtau * dz2;
          dir.dkappa = (rrk - kappa * dir.dtau) / tau;
          dir.dss = dd - dir.dzs;
          return dir;
        };
        Direction dir = raw(bx, bz, bt, d_scaled, rk);
        const Vector zero_d = Vector::Zero(cone_.total);
        double last = std::numeric_limits<double>::infinity();
        Direction best;
        for (int pass = 0;; ++pass) {
          dir.ds = unscale(dir.dss, true);
          dir.dz = unscale(dir.dzs, false);
          const Vector ex = bx - (g_.transpose() * dir.dz + c_ * dir.dtau);
          const Vector ez = bz - (g_ * dir.dx + dir.ds - h_ * dir.dtau);
          const double et = bt - (dir.dkappa + c_.dot(dir.dx) + h_.dot(dir.dz));
          const double err = std::sqrt(ex.squaredNorm() + ez.squaredNorm() + et * et);
          if (pass == 0 || err < last) best = dir;
          // stop once refinement no longer pays off
          const bool done = pass == kRefinePasses || (pass >= 2 && err > 0.5 * last);
          last = std::min(last, err);
          if (done) break;
          const Direction corr = raw(ex, ez, et, zero_d, 0.0);
          dir.dx += corr.dx;
          dir.dzs += corr.dzs;
          dir.dss += corr.dss;
          dir.dtau += corr.dtau;
          dir.dkappa += corr.dkappa;
        }
        // slack and κ steps from the linear equations, so feasibility is
        // carried over exactly; centering takes the roundoff
        best.ds = bz - g_ * best.dx + h_ * best.dtau;
        best.dss = scale_vec(best.ds);
        best.dkappa = bt - c_.dot(best.dx) - h_.dot(best.dz);
        err_out = (bx - (g_.transpose() * best.dz + c_ * best.dtau)).norm();
        return best;
      };
      auto direction = [&](double eta, const Vector& d_scaled, double rk) {
        double e_qr = std::numeric_limits<double>::infinity();
        double e_ne = e_qr;
        Direction a, b;
        if (have_qr) a = newton(true, -eta * rx, -eta * rz, -eta * rt, d_scaled, rk, e_qr);
        if (have_llt) b = newton(false, -eta * rx, -eta * rz, -eta * rt, d_scaled, rk, e_ne);
        return e_qr <= e_ne ? a : b;
      };
      auto max_step = [&](const Direction& dir) {
        double a = std::numeric_limits<double>::infinity();
        for (Index b = 0; b < nb; ++b) {
          const auto bb = static_cast<std::size_t>(b);
          a = std::min(a, max_step_block(w[bb].lambda, cone_.block_matrix(dir.dss, bb)));
          a = std::min(a, max_step_block(w[bb].lambda, cone_.block_matrix(dir.dzs, bb)));
        }
        if (dir.dtau < 0.0) a = std::min(a, -tau / dir.dtau);
        if (dir.dkappa < 0.0) a = std::min(a, -kappa / dir.dkappa);
        return a;
      };

      // Predictor: D = Λ⁻¹∘(−Λ∘Λ) = −Λ.
      const Direction aff = direction(1.0, -lam_vec, -tau * kappa);
      const double a_aff = std::min(1.0, max_step(aff));
      const double sigma = std::pow(1.0 - a_aff, 3.0);

      // Corrector with the second-order term ds̃∘dz̃.
      Vector d_corr(cone_.total);
      for (Index b = 0; b < nb; ++b) {
        const auto bb = static_cast<std::size_t>(b);
        const Vector& lam = w[bb].lambda;
        Matrix rc = -Matrix(lam.cwiseProduct(lam).asDiagonal());
        rc.diagonal().array() += sigma * mu;
        rc -= jordan(cone_.block_matrix(aff.dss, bb), cone_.block_matrix(aff.dzs, bb));
        cone_.set_block(d_corr, bb, jordan_solve_diag(lam, rc));
      }
      const double rk_corr = -tau * kappa + sigma * mu - aff.dtau * aff.dkappa;
      const Direction dir = direction(1.0 - sigma, d_corr, rk_corr);
      const double step = std::min(1.0, opts_.step_fraction * max_step(dir));
      if (opts_.verbose) std::fprintf(stderr, "     sigma %.2e  step %.3e\n", sigma, step);
      if (!(step > 1e-12)) {
        if (++stalls >= 3) {
          res.message = "step length collapsed";
          return res;
        }
      } else {
        stalls = 0;
      }

      // Update iterate and scaling (factored NT update).
      x += step * dir.dx;
      tau += step * dir.dtau;
      kappa += step * dir.dkappa;
      for (Index b = 0; b < nb; ++b) {
        const auto bb = static_cast<std::size_t>(b);
        BlockScaling& sc = w[bb];
        Matrix s_new = Matrix(sc.lambda.asDiagonal()) + step * cone_.block_matrix(dir.dss, bb);
        Matrix z_new = Matrix(sc.lambda.asDiagonal()) + step * cone_.block_matrix(dir.dzs, bb);
        s_new = 0.5 * (s_new + s_new.transpose());
        z_new = 0.5 * (z_new + z_new.transpose());
        Matrix l1, l2;
        if (!factor(s_new, l1) || !factor(z_new, l2)) {
          res.message = "iterate left the cone";
          return res;
        }
        const Matrix ls = sc.r * l1;
        const Matrix lz = sc.r_invt * l2;
        BlockScaling next;
        if (!scaling_from_factors(ls, lz, next)) {
          res.message = "scaling update failed";
          return res;
        }
        sc = std::move(next);
      }
      s += step * dir.ds;
      z += step * dir.dz;
      // rescale from the iterate itself; the factored update drifts near the boundary
      for (Index b = 0; b < nb; ++b) {
        const auto bb = static_cast<std::size_t>(b);
        Matrix ls, lz;
        BlockScaling next;
        if (factor(cone_.block_matrix(s, bb), ls) && factor(cone_.block_matrix(z, bb), lz) &&
            scaling_from_factors(ls, lz, next)) {
          w[bb] = std::move(next);
        }
      }
      if (!(tau > 0.0) || !(kappa > 0.0) || !x.allFinite()) {
        res.message = "embedding variables left the cone";
        return res;
      }
    }
  }

  double objective_offset = 0.0;

 private:
  SparseMatrix g_;
  Vector h_;
  Vector c_;
  ConeLayout cone_;
  Options opts_;
  Index p_ = 0;
  double nu_ = 0.0;
  std::vector<std::vector<BlockEntry>> col_entries_;
};

}  // namespace detail

/// Solves a compiled LMI problem.
inline SolveReport solve(const ConicForm& f, const Options& opts = {}) {
  SolveReport rep;
  if (f.G.rows() != f.cone_size() || f.h.size() != f.cone_size() ||
      f.c.size() != f.num_vars || f.G.cols() != f.num_vars ||
      f.A.cols() != f.num_vars || f.A.rows() != f.b.size()) {
    throw DimensionMismatch("conic form has inconsistent dimensions");
  }
  detail::Reduction red = detail::reduce_equalities(f);
  if (red.inconsistent) {
    rep.status = Status::Infeasible;
    rep.z = Vector::Zero(f.cone_size());
    rep.certificate_residual = 0.0;
    rep.message = "linear equalities are inconsistent";
    return rep;
  }
  bool has_aux = false;
  {
    std::vector<int> g_count(static_cast<std::size_t>(f.num_vars), 0);
    for (int k = 0; k < f.G.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(f.G, k); it; ++it) ++g_count[static_cast<std::size_t>(it.col())];
    }
    for (int k = 0; k < red.N.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(red.N, k); it; ++it) {
        if (g_count[static_cast<std::size_t>(it.row())] == 0 && f.c(it.row()) == 0.0) has_aux = true;
      }
    }
  }
  if (has_aux) detail::prune_inert_directions(f, red);

  const SparseMatrix gr = f.G * red.N;
  const Vector hr = f.h - f.G * red.x0;
  const Vector cr = red.N.transpose() * f.c;
  const double offset = f.c0 + f.c.dot(red.x0);

  auto finish_x = [&](const Vector& w_red) {
    Vector x = red.x0 + red.N * w_red;
    for (auto it = red.recover.rbegin(); it != red.recover.rend(); ++it) {
      const int row = it->first;
      const int var = it->second;
      double rhs = f.b(row);
      double coef = 0.0;
      for (int k = 0; k < f.A.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator jt(f.A, k); jt; ++jt) {
          if (jt.row() != row) continue;
          if (jt.col() == var) {
            coef += jt.value();
          } else {
            rhs -= jt.value() * x(jt.col());
          }
        }
      }
      x(var) = rhs / coef;
    }
    return x;
  };

  if (f.block_dims.empty() || red.N.cols() == 0) {
    // Nothing to optimize over the cone: check the fixed point.
    const Vector x = finish_x(Vector::Zero(red.N.cols()));
    if (red.N.cols() > 0 && cr.norm() > 0.0) {
      rep.status = Status::Unbounded;
      rep.message = "objective unbounded without cone constraints";
      return rep;
    }
    const Vector s = f.h - f.G * x;
    detail::ConeLayout cone(f.block_dims);
    if (f.block_dims.empty() || cone.min_eig(s) >= -opts.tol_feas) {
      rep.status = Status::Optimal;
      rep.x = x;
      rep.s = s;
      rep.z = Vector::Zero(f.cone_size());
      rep.primal_objective = f.c.dot(x) + f.c0;
      rep.dual_objective = rep.primal_objective;
    } else {
      rep.status = Status::Infeasible;
      rep.message = "fixed point violates the cone";
    }
    return rep;
  }

  detail::HsdSolver solver(gr, hr, cr, f.block_dims, opts);
  solver.objective_offset = offset;
  auto r = solver.run();
  rep.status = r.status;
  rep.iterations = r.iterations;
  rep.residuals = r.residuals;
  rep.message = r.message;
  rep.certificate_residual = r.certificate_residual;
  switch (r.status) {
    case Status::Optimal:
      rep.x = finish_x(r.x);
      rep.s = r.s;
      rep.z = r.z;
      rep.primal_objective = f.c.dot(rep.x) + f.c0;
      rep.dual_objective = -hr.dot(r.z) + offset;
      break;
    case Status::Infeasible: {
      rep.z = r.z;
      const Vector gtz = f.G.transpose() * r.z;
      if (f.A.rows() > 0) {
        // Aᵀy ≈ −Gᵀz in the least-squares sense.
        Eigen::LeastSquaresConjugateGradient<SparseMatrix> lscg;
        const SparseMatrix at = f.A.transpose();
        lscg.setTolerance(1e-15);
        lscg.setMaxIterations(10 * static_cast<int>(f.A.rows()) + 100);
        lscg.compute(at);
        rep.y = lscg.solve(-gtz);
        rep.certificate_residual = (gtz + at * rep.y).norm();
      } else {
        rep.y = Vector::Zero(0);
        rep.certificate_residual = gtz.norm();
      }
      break;
    }
    case Status::Unbounded:
      rep.x = red.N * r.x;
      rep.s = r.s;
      break;
    case Status::NumericalTrouble:
      break;
  }
  return rep;
}

}  // namespace structh2::sdp
