#pragma once

// Controller structure: a subspace 𝒮 ⊆ R^{m×n} given by a sparsity pattern or
// an explicit basis {S_ℓ}, its representation matrix S = [S₁ … S_k], and the
// linear system S(I_k ⊗ Q) = S(Λ ⊗ I_n) whose Q-projection is the convex set
// Υ(S). For L ∈ 𝒮 and invertible R ∈ Υ(S), L·R⁻¹ ∈ 𝒮.

#include <Eigen/QR>
#include <Eigen/SVD>

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "structh2/csv.hpp"
#include "structh2/errors.hpp"
#include "structh2/linalg.hpp"

namespace structh2 {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline Matrix mask_to_matrix(const Mask& mask) { return mask.cast<double>().matrix(); }

class SubspaceSpec {
 public:
  /// Subspace of matrices whose zero entries include every 0 in `pattern`.
  /// Basis order is a row-major scan of the ones.
  static SubspaceSpec from_pattern(const Mask& pattern) {
    if (!pattern.any()) {
      throw EmptySubspace("sparsity pattern has no free entries");
    }
    SubspaceSpec s;
    s.m_ = pattern.rows();
    s.n_ = pattern.cols();
    for (Index i = 0; i < s.m_; ++i) {
      for (Index j = 0; j < s.n_; ++j) {
        if (!pattern(i, j)) continue;
        Matrix e = Matrix::Zero(s.m_, s.n_);
        e(i, j) = 1.0;
        s.basis_.push_back(std::move(e));
      }
    }
    s.pattern_ = pattern;
    s.finish();
    return s;
  }

  static SubspaceSpec from_basis(std::vector<Matrix> basis) {
    if (basis.empty()) throw EmptySubspace("empty basis");
    SubspaceSpec s;
    s.m_ = basis.front().rows();
    s.n_ = basis.front().cols();
    for (const auto& b : basis) {
      if (b.rows() != s.m_ || b.cols() != s.n_) {
        throw DimensionMismatch("basis matrices differ in shape");
      }
      require_finite(b, "basis matrix");
    }
    s.basis_ = std::move(basis);
    s.finish();
    Eigen::ColPivHouseholderQR<Matrix> qr(s.vec_basis_);
    qr.setThreshold(1e-10);
    if (qr.rank() != s.k()) {
      throw Error("basis matrices are linearly dependent (rank " +
                  std::to_string(qr.rank()) + " < " + std::to_string(s.k()) +
                  ")");
    }
    return s;
  }

  Index m() const { return m_; }
  Index n() const { return n_; }
  Index k() const { return static_cast<Index>(basis_.size()); }
  const std::vector<Matrix>& basis() const { return basis_; }
  const std::optional<Mask>& pattern() const { return pattern_; }

  /// Representation matrix [S₁ … S_k] ∈ R^{m×nk}.
  Matrix repmat() const {
    Matrix s(m_, n_ * k());
    for (Index l = 0; l < k(); ++l) s.middleCols(l * n_, n_) = basis_[l];
    return s;
  }

  /// Column ℓ is vec(S_ℓ) (column-major).
  const Matrix& vectorized_basis() const { return vec_basis_; }

  /// Euclidean distance from `k_mat` to the span of the basis.
  double distance(const Matrix& k_mat) const {
    if (k_mat.rows() != m_ || k_mat.cols() != n_) {
      throw DimensionMismatch("matrix is " + std::to_string(k_mat.rows()) +
                              "x" + std::to_string(k_mat.cols()) +
                              ", subspace lives in " + std::to_string(m_) +
                              "x" + std::to_string(n_));
    }
    if (pattern_) {
      return (k_mat.array() * (!*pattern_).cast<double>()).matrix().norm();
    }
    const Vector v = Eigen::Map<const Vector>(k_mat.data(), k_mat.size());
    const Vector coeffs = qr_.solve(v);
    return (v - vec_basis_ * coeffs).norm();
  }

 private:
  SubspaceSpec() = default;

  void finish() {
    vec_basis_.resize(m_ * n_, k());
    for (Index l = 0; l < k(); ++l) {
      vec_basis_.col(l) = Eigen::Map<const Vector>(basis_[l].data(), m_ * n_);
    }
    qr_.compute(vec_basis_);
  }

  Index m_ = 0;
  Index n_ = 0;
  std::vector<Matrix> basis_;
  std::optional<Mask> pattern_;
  Matrix vec_basis_;
  Eigen::ColPivHouseholderQR<Matrix> qr_;
};

constexpr double kMembershipTol = 1e-7;

/// K ∈ 𝒮 up to tol·(1 + ‖K‖_F).
inline bool contains(const SubspaceSpec& spec, const Matrix& k_mat,
                     double tol = kMembershipTol) {
  return spec.distance(k_mat) <= tol * (1.0 + k_mat.norm());
}

// ---------------------------------------------------------------------------
// Υ(S)

enum class LambdaKind { General, Symmetric };

/// One scalar unknown of the Υ system: an entry of Q (n×n) or of Λ (k×k).
struct UpsilonTerm {
  enum class Var { Q, Lambda };
  Var var;
  Index row;
  Index col;
  double coef;
};

/// Homogeneous linear equations on (Q, Λ), entrywise equivalent to
/// S(I_k ⊗ Q) = S(Λ ⊗ I_n) (plus Λ = Λᵀ for LambdaKind::Symmetric).
struct UpsilonConstraint {
  Index n = 0;
  Index k = 0;
  LambdaKind lambda_kind = LambdaKind::General;
  std::vector<std::vector<UpsilonTerm>> equations;

  /// Largest absolute equation residual at (Q, Λ).
  double residual(const Matrix& q, const Matrix& lambda) const {
    double worst = 0.0;
    for (const auto& eq : equations) {
      double v = 0.0;
      for (const auto& t : eq) {
        v += t.coef * (t.var == UpsilonTerm::Var::Q ? q(t.row, t.col)
                                                    : lambda(t.row, t.col));
      }
      worst = std::max(worst, std::abs(v));
    }
    return worst;
  }
};

inline UpsilonConstraint upsilon_constraints(
    const SubspaceSpec& spec, LambdaKind kind = LambdaKind::General) {
  UpsilonConstraint out;
  out.n = spec.n();
  out.k = spec.k();
  out.lambda_kind = kind;
  const auto& basis = spec.basis();
  const Index m = spec.m();
  const Index n = spec.n();
  const Index k = spec.k();
  // Block j of both sides: S_j·Q = Σ_ℓ Λ_{ℓj} S_ℓ, compared entrywise.
  for (Index j = 0; j < k; ++j) {
    const Matrix& sj = basis[j];
    for (Index r = 0; r < m; ++r) {
      for (Index c = 0; c < n; ++c) {
        std::vector<UpsilonTerm> eq;
        for (Index t = 0; t < n; ++t) {
          if (sj(r, t) != 0.0) {
            eq.push_back({UpsilonTerm::Var::Q, t, c, sj(r, t)});
          }
        }
        for (Index l = 0; l < k; ++l) {
          if (basis[l](r, c) != 0.0) {
            eq.push_back({UpsilonTerm::Var::Lambda, l, j, -basis[l](r, c)});
          }
        }
        if (!eq.empty()) out.equations.push_back(std::move(eq));
      }
    }
  }
  if (kind == LambdaKind::Symmetric) {
    for (Index a = 0; a < k; ++a) {
      for (Index b = a + 1; b < k; ++b) {
        out.equations.push_back({{UpsilonTerm::Var::Lambda, a, b, 1.0},
                                 {UpsilonTerm::Var::Lambda, b, a, -1.0}});
      }
    }
  }
  return out;
}

/// Least-squares residual ‖S(I_k⊗Q) − S(Λ⊗I_n)‖_F over Λ.
inline double upsilon_residual(const SubspaceSpec& spec, const Matrix& q,
                               LambdaKind kind = LambdaKind::General) {
  if (q.rows() != spec.n() || q.cols() != spec.n()) {
    throw DimensionMismatch("Q must be n×n for the subspace");
  }
  const auto& basis = spec.basis();
  const Index k = spec.k();
  if (kind == LambdaKind::General) {
    // Columns of Λ decouple: column j only has to reproduce S_j·Q in 𝒮.
    double sq = 0.0;
    for (Index j = 0; j < k; ++j) {
      const double d = spec.distance(basis[j] * q);
      sq += d * d;
    }
    return std::sqrt(sq);
  }
  // Symmetric Λ couples the columns; solve the joint least-squares problem
  // over the k(k+1)/2 free entries.
  const Index mn = spec.m() * spec.n();
  const Index nfree = k * (k + 1) / 2;
  Matrix a = Matrix::Zero(mn * k, nfree);
  Vector rhs(mn * k);
  const Matrix& vb = spec.vectorized_basis();
  auto sym_index = [k](Index i, Index j) {
    if (i > j) std::swap(i, j);
    return i * k - i * (i - 1) / 2 + (j - i);
  };
  for (Index j = 0; j < k; ++j) {
    const Matrix sjq = basis[j] * q;
    rhs.segment(j * mn, mn) = Eigen::Map<const Vector>(sjq.data(), mn);
    for (Index l = 0; l < k; ++l) {
      a.block(j * mn, sym_index(l, j), mn, 1) += vb.col(l);
    }
  }
  const Vector lam = a.colPivHouseholderQr().solve(rhs);
  return (rhs - a * lam).norm();
}

inline bool upsilon_member(const SubspaceSpec& spec, const Matrix& q,
                           double tol = kMembershipTol,
                           LambdaKind kind = LambdaKind::General) {
  return upsilon_residual(spec, q, kind) <= tol * (1.0 + q.norm());
}

/// Basis of Υ(S) for general Λ: all Q with S_j·Q ∈ 𝒮 for every j.
inline std::vector<Matrix> upsilon_basis(const SubspaceSpec& spec) {
  const Index n = spec.n();
  const Index m = spec.m();
  const Index k = spec.k();
  const Matrix& vb = spec.vectorized_basis();
  // Orthogonal projector onto the complement of 𝒮 in vec coordinates.
  Eigen::ColPivHouseholderQR<Matrix> qr(vb);
  const Matrix qfull = qr.householderQ();
  const Matrix comp = qfull.rightCols(m * n - qr.rank());
  Matrix sys(comp.cols() * k, n * n);
  for (Index j = 0; j < k; ++j) {
    // vec(S_j Q) = (I_n ⊗ S_j) vec(Q)
    const Matrix op = kron(Matrix::Identity(n, n), spec.basis()[j]);
    sys.middleRows(j * comp.cols(), comp.cols()) = comp.transpose() * op;
  }
  std::vector<Matrix> out;
  if (sys.rows() == 0) {
    for (Index i = 0; i < n * n; ++i) {
      Matrix e = Matrix::Zero(n, n);
      e(i % n, i / n) = 1.0;
      out.push_back(std::move(e));
    }
    return out;
  }
  Eigen::JacobiSVD<Matrix> svd(sys, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double cut = 1e-10 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cut) ++rank;
  }
  const Matrix& v = svd.matrixV();
  for (Index c = rank; c < n * n; ++c) {
    Vector col = v.col(c);
    out.push_back(Eigen::Map<Matrix>(col.data(), n, n));
  }
  return out;
}

/// Entries of Q that vanish on all of Υ(S) (general Λ).
inline Mask upsilon_forced_zeros(const SubspaceSpec& spec) {
  const Index n = spec.n();
  Matrix acc = Matrix::Zero(n, n);
  for (const auto& b : upsilon_basis(spec)) acc += b.cwiseAbs();
  return acc.array() <= 1e-9;
}

// ---------------------------------------------------------------------------
// Files

/// CSV of 0/1 integers.
inline Mask read_pattern(const std::filesystem::path& path) {
  const Matrix m = csv::read_matrix(path);
  if (m.size() == 0) throw ParseError(path.string() + ": empty pattern");
  if (((m.array() != 0.0) && (m.array() != 1.0)).any()) {
    throw ParseError(path.string() + ": pattern entries must be 0 or 1");
  }
  return m.array() != 0.0;
}

/// Concatenated m×n CSV blocks separated by blank lines.
inline SubspaceSpec read_basis(const std::filesystem::path& path) {
  return SubspaceSpec::from_basis(csv::read_blocks(path));
}

}  // namespace structh2
