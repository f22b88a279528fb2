#pragma once

// Small LMI modeling layer. Matrix decision variables are declared on an
// LmiProblem, combined into affine matrix expressions, and constrained by
// "block ⪰ margin·I" and "expression = 0". compile() lowers the problem to
//
//   minimize cᵀx  subject to  A x = b,  h − G x ∈ K,
//
// where K is a product of PSD cones in scaled symmetric vectorization
// (off-diagonals ×√2), so that the Euclidean inner product of two svec'd
// blocks equals their trace inner product.

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "structh2/errors.hpp"
#include "structh2/linalg.hpp"
#include "structh2/subspace.hpp"

namespace structh2::lmi {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

inline constexpr double kSqrt2 = 1.4142135623730951;

inline Index svec_size(Index dim) { return dim * (dim + 1) / 2; }

/// Position of entry (i, j), i ≥ j, in the lower-triangular column-major svec.
inline Index svec_index(Index dim, Index i, Index j) {
  if (i < j) std::swap(i, j);
  return j * dim - j * (j - 1) / 2 + (i - j);
}

inline Vector svec(const Matrix& m) {
  const Index d = m.rows();
  Vector v(svec_size(d));
  Index k = 0;
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i) {
      v(k++) = i == j ? m(i, j) : kSqrt2 * 0.5 * (m(i, j) + m(j, i));
    }
  }
  return v;
}

inline Matrix smat(const Vector& v, Index d) {
  if (v.size() != svec_size(d)) throw DimensionMismatch("smat: length mismatch");
  Matrix m(d, d);
  Index k = 0;
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i) {
      const double val = i == j ? v(k) : v(k) / kSqrt2;
      m(i, j) = val;
      m(j, i) = val;
      ++k;
    }
  }
  return m;
}

enum class VarKind { Symmetric, Rectangular, Scalar };

/// Handle to a matrix of scalar decision variables. Entry (i, j) maps to a
/// scalar index of the owning problem, or −1 where a mask forces zero.
class MatrixVar {
 public:
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  VarKind kind() const { return kind_; }
  std::size_t id() const { return id_; }

  int index(Index i, Index j) const { return idx_[static_cast<std::size_t>(j * rows_ + i)]; }

  std::size_t free_entries() const {
    std::vector<int> seen;
    for (int v : idx_) {
      if (v >= 0 && std::find(seen.begin(), seen.end(), v) == seen.end()) seen.push_back(v);
    }
    return seen.size();
  }

 private:
  friend class LmiProblem;
  std::size_t id_ = 0;
  Index rows_ = 0;
  Index cols_ = 0;
  VarKind kind_ = VarKind::Rectangular;
  std::vector<int> idx_;
};

/// Affine matrix expression  constant + Σ x_i · coef_i.
class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(Index rows, Index cols) : constant_(Matrix::Zero(rows, cols)) {}
  explicit AffineExpr(Matrix constant) : constant_(std::move(constant)) {}

  static AffineExpr zeros(Index rows, Index cols) { return AffineExpr(rows, cols); }

  static AffineExpr of(const MatrixVar& v) {
    AffineExpr e(v.rows(), v.cols());
    for (Index j = 0; j < v.cols(); ++j) {
      for (Index i = 0; i < v.rows(); ++i) {
        const int k = v.index(i, j);
        if (k < 0) continue;
        auto [it, inserted] = e.terms_.try_emplace(k, Matrix::Zero(v.rows(), v.cols()));
        (void)inserted;
        it->second(i, j) = 1.0;
      }
    }
    return e;
  }

  Index rows() const { return constant_.rows(); }
  Index cols() const { return constant_.cols(); }
  const Matrix& constant() const { return constant_; }
  const std::map<int, Matrix>& terms() const { return terms_; }

  AffineExpr& operator+=(const AffineExpr& o) {
    check_same_shape(o);
    constant_ += o.constant_;
    for (const auto& [k, c] : o.terms_) {
      auto it = terms_.find(k);
      if (it == terms_.end()) {
        terms_.emplace(k, c);
      } else {
        it->second += c;
      }
    }
    prune();
    return *this;
  }
  AffineExpr& operator-=(const AffineExpr& o) { return *this += -o; }

  AffineExpr operator-() const { return (*this) * -1.0; }

  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
  friend AffineExpr operator+(AffineExpr a, const Matrix& b) { return a += AffineExpr(b); }
  friend AffineExpr operator-(AffineExpr a, const Matrix& b) { return a -= AffineExpr(b); }

  friend AffineExpr operator*(const AffineExpr& a, double s) {
    AffineExpr out(s * a.constant_);
    for (const auto& [k, c] : a.terms_) out.terms_.emplace(k, s * c);
    out.prune();
    return out;
  }
  friend AffineExpr operator*(double s, const AffineExpr& a) { return a * s; }

  friend AffineExpr operator*(const Matrix& left, const AffineExpr& a) {
    if (left.cols() != a.rows()) throw DimensionMismatch("left product: inner dimensions differ");
    AffineExpr out(left * a.constant_);
    for (const auto& [k, c] : a.terms_) out.terms_.emplace(k, left * c);
    out.prune();
    return out;
  }
  friend AffineExpr operator*(const AffineExpr& a, const Matrix& right) {
    if (a.cols() != right.rows()) throw DimensionMismatch("right product: inner dimensions differ");
    AffineExpr out(a.constant_ * right);
    for (const auto& [k, c] : a.terms_) out.terms_.emplace(k, c * right);
    out.prune();
    return out;
  }

  /// s·M for a 1×1 expression s and constant M.
  static AffineExpr scaled(const AffineExpr& s, const Matrix& m) {
    if (s.rows() != 1 || s.cols() != 1) throw DimensionMismatch("scaled: expression must be 1x1");
    AffineExpr out(Matrix(s.constant_(0, 0) * m));
    for (const auto& [k, c] : s.terms_) out.terms_.emplace(k, c(0, 0) * m);
    out.prune();
    return out;
  }

  AffineExpr transpose() const {
    AffineExpr out(Matrix(constant_.transpose()));
    for (const auto& [k, c] : terms_) out.terms_.emplace(k, c.transpose());
    return out;
  }

  /// 1×1 expression holding the trace.
  AffineExpr trace() const {
    if (rows() != cols()) throw DimensionMismatch("trace of a non-square expression");
    AffineExpr out(Matrix::Constant(1, 1, constant_.trace()));
    for (const auto& [k, c] : terms_) out.terms_.emplace(k, Matrix::Constant(1, 1, c.trace()));
    out.prune();
    return out;
  }

  /// Sub-block view as a new expression.
  AffineExpr block(Index r, Index c, Index nr, Index nc) const {
    AffineExpr out(Matrix(constant_.block(r, c, nr, nc)));
    for (const auto& [k, m] : terms_) out.terms_.emplace(k, m.block(r, c, nr, nc));
    out.prune();
    return out;
  }

  /// Assembles a block matrix from rows of expressions. Row heights and
  /// column widths must agree across the grid.
  static AffineExpr blocks(const std::vector<std::vector<AffineExpr>>& grid) {
    if (grid.empty() || grid.front().empty()) return AffineExpr();
    const std::size_t ncols = grid.front().size();
    std::vector<Index> heights;
    std::vector<Index> widths;
    for (const auto& row : grid) {
      if (row.size() != ncols) throw DimensionMismatch("ragged block grid");
      heights.push_back(row.front().rows());
    }
    for (const auto& e : grid.front()) widths.push_back(e.cols());
    Index total_r = 0;
    Index total_c = 0;
    for (Index h : heights) total_r += h;
    for (Index w : widths) total_c += w;
    AffineExpr out(total_r, total_c);
    Index r0 = 0;
    for (std::size_t bi = 0; bi < grid.size(); ++bi) {
      Index c0 = 0;
      for (std::size_t bj = 0; bj < ncols; ++bj) {
        const AffineExpr& e = grid[bi][bj];
        if (e.rows() != heights[bi] || e.cols() != widths[bj]) {
          throw DimensionMismatch("block (" + std::to_string(bi) + "," +
                                  std::to_string(bj) + ") has inconsistent shape");
        }
        out.constant_.block(r0, c0, e.rows(), e.cols()) = e.constant_;
        for (const auto& [k, c] : e.terms_) {
          auto [it, inserted] = out.terms_.try_emplace(k, Matrix::Zero(total_r, total_c));
          (void)inserted;
          it->second.block(r0, c0, e.rows(), e.cols()) += c;
        }
        c0 += widths[bj];
      }
      r0 += heights[bi];
    }
    return out;
  }

  Matrix evaluate(const Vector& x) const {
    Matrix out = constant_;
    for (const auto& [k, c] : terms_) {
      if (k >= x.size()) throw UnboundedShape("assignment shorter than variable index");
      out += x(k) * c;
    }
    return out;
  }

  int max_index() const { return terms_.empty() ? -1 : terms_.rbegin()->first; }

 private:
  void check_same_shape(const AffineExpr& o) const {
    if (rows() != o.rows() || cols() != o.cols()) {
      throw DimensionMismatch("expression shapes differ: " + std::to_string(rows()) +
                              "x" + std::to_string(cols()) + " vs " +
                              std::to_string(o.rows()) + "x" + std::to_string(o.cols()));
    }
  }

  void prune() {
    for (auto it = terms_.begin(); it != terms_.end();) {
      if (it->second.size() == 0 || it->second.isZero(0.0)) {
        it = terms_.erase(it);
      } else {
        ++it;
      }
    }
  }

  Matrix constant_;
  std::map<int, Matrix> terms_;
};

struct PsdConstraint {
  AffineExpr block;
  double margin = 0.0;
  std::string name;
};

/// Sparse linear equation Σ coef·x_i = rhs.
struct LinearEquation {
  std::vector<std::pair<int, double>> terms;
  double rhs = 0.0;
};

/// Compiled problem: minimize cᵀx + c0 s.t. A x = b, h − G x ∈ K.
struct ConicForm {
  Index num_vars = 0;
  std::vector<Index> block_dims;
  SparseMatrix G;
  Vector h;
  SparseMatrix A;
  Vector b;
  Vector c;
  double c0 = 0.0;

  Index cone_size() const {
    Index s = 0;
    for (Index d : block_dims) s += svec_size(d);
    return s;
  }

  /// Text export: header with dimensions, then triplets of c, G, h, A, b.
  void dump(std::ostream& out) const {
    out << "# conic form: minimize c'x s.t. A x = b, h - G x in K (svec, off-diagonal x sqrt2)\n";
    out << "vars " << num_vars << "\n";
    out << "blocks " << block_dims.size();
    for (Index d : block_dims) out << ' ' << d;
    out << "\n";
    out << "equalities " << A.rows() << "\n";
    out.precision(17);
    out << "c0 " << c0 << "\n";
    for (Index i = 0; i < c.size(); ++i) {
      if (c(i) != 0.0) out << "c " << i << ' ' << c(i) << "\n";
    }
    for (int k = 0; k < G.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(G, k); it; ++it) {
        out << "G " << it.row() << ' ' << it.col() << ' ' << it.value() << "\n";
      }
    }
    for (Index i = 0; i < h.size(); ++i) {
      if (h(i) != 0.0) out << "h " << i << ' ' << h(i) << "\n";
    }
    for (int k = 0; k < A.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
        out << "A " << it.row() << ' ' << it.col() << ' ' << it.value() << "\n";
      }
    }
    for (Index i = 0; i < b.size(); ++i) {
      if (b(i) != 0.0) out << "b " << i << ' ' << b(i) << "\n";
    }
  }
};

class LmiProblem {
 public:
  /// Declares a matrix variable. Masked-out entries (false) are structural
  /// zeros. Symmetric variables share (i, j) and (j, i); the mask, if any,
  /// must then be symmetric.
  MatrixVar declare(Index rows, Index cols, VarKind kind,
                    const std::optional<Mask>& mask = std::nullopt) {
    if (rows < 1 || cols < 1) throw DimensionMismatch("variable shape must be positive");
    if (kind == VarKind::Symmetric && rows != cols) {
      throw DimensionMismatch("symmetric variable must be square");
    }
    if (kind == VarKind::Scalar && (rows != 1 || cols != 1)) {
      throw DimensionMismatch("scalar variable must be 1x1");
    }
    if (mask && (mask->rows() != rows || mask->cols() != cols)) {
      throw DimensionMismatch("mask shape differs from variable shape");
    }
    if (mask && kind == VarKind::Symmetric && (*mask != mask->transpose()).any()) {
      throw Error("mask of a symmetric variable must be symmetric");
    }
    MatrixVar v;
    v.id_ = next_var_id_++;
    v.rows_ = rows;
    v.cols_ = cols;
    v.kind_ = kind;
    v.idx_.assign(static_cast<std::size_t>(rows * cols), -1);
    for (Index j = 0; j < cols; ++j) {
      for (Index i = 0; i < rows; ++i) {
        if (mask && !(*mask)(i, j)) continue;
        if (kind == VarKind::Symmetric && i < j) continue;
        const int k = num_scalars_++;
        v.idx_[static_cast<std::size_t>(j * rows + i)] = k;
        if (kind == VarKind::Symmetric) v.idx_[static_cast<std::size_t>(i * rows + j)] = k;
      }
    }
    return v;
  }

  MatrixVar symmetric(Index n, const std::optional<Mask>& mask = std::nullopt) {
    return declare(n, n, VarKind::Symmetric, mask);
  }
  MatrixVar rectangular(Index r, Index c, const std::optional<Mask>& mask = std::nullopt) {
    return declare(r, c, VarKind::Rectangular, mask);
  }
  MatrixVar scalar() { return declare(1, 1, VarKind::Scalar); }

  /// Records block − margin·I ⪰ 0.
  void add_psd(const AffineExpr& block, double margin = 0.0, std::string name = {}) {
    if (block.rows() != block.cols() || block.rows() == 0) {
      throw DimensionMismatch("PSD block must be square and nonempty");
    }
    if (!(margin >= 0.0)) throw Error("PSD margin must be nonnegative");
    const auto asym = [](const Matrix& m) { return (m - m.transpose()).cwiseAbs().maxCoeff(); };
    const double scale = 1.0 + block.constant().cwiseAbs().maxCoeff();
    if (asym(block.constant()) > 1e-9 * scale) {
      throw Error("PSD block '" + name + "' has a non-symmetric constant part");
    }
    for (const auto& [k, c] : block.terms()) {
      if (asym(c) > 1e-12 * (1.0 + c.cwiseAbs().maxCoeff())) {
        throw Error("PSD block '" + name + "' is not symmetric in variable " + std::to_string(k));
      }
    }
    psd_.push_back({block, margin, std::move(name)});
  }

  /// Every entry of `expr` equals zero.
  void add_equality(const AffineExpr& expr) {
    for (Index j = 0; j < expr.cols(); ++j) {
      for (Index i = 0; i < expr.rows(); ++i) {
        LinearEquation eq;
        for (const auto& [k, c] : expr.terms()) {
          if (c(i, j) != 0.0) eq.terms.emplace_back(k, c(i, j));
        }
        eq.rhs = -expr.constant()(i, j);
        if (eq.terms.empty()) {
          if (std::abs(eq.rhs) > 0.0) infeasible_equalities_ = true;
          continue;
        }
        equalities_.push_back(std::move(eq));
      }
    }
  }

  void add_equality(LinearEquation eq) {
    if (eq.terms.empty()) {
      if (eq.rhs != 0.0) infeasible_equalities_ = true;
      return;
    }
    equalities_.push_back(std::move(eq));
  }

  void minimize(const AffineExpr& objective) {
    if (objective.rows() != 1 || objective.cols() != 1) {
      throw DimensionMismatch("objective must be a scalar expression");
    }
    objective_ = objective;
  }

  int num_scalars() const { return num_scalars_; }
  const std::vector<PsdConstraint>& psd_constraints() const { return psd_; }
  const std::vector<LinearEquation>& equalities() const { return equalities_; }
  bool trivially_infeasible_equalities() const { return infeasible_equalities_; }

  ConicForm compile() const {
    ConicForm f;
    f.num_vars = num_scalars_;
    const auto check = [this](const AffineExpr& e, const std::string& what) {
      if (e.max_index() >= num_scalars_) {
        throw UnboundedShape(what + " references an undeclared variable");
      }
    };
    Index offset = 0;
    std::vector<Triplet> gt;
    std::vector<double> h;
    for (const auto& con : psd_) {
      check(con.block, "PSD block '" + con.name + "'");
      const Index d = con.block.rows();
      f.block_dims.push_back(d);
      const Matrix f0 = con.block.constant() - con.margin * Matrix::Identity(d, d);
      const Vector hv = svec(f0);
      h.insert(h.end(), hv.data(), hv.data() + hv.size());
      for (const auto& [k, c] : con.block.terms()) {
        const Vector g = svec(c);
        for (Index i = 0; i < g.size(); ++i) {
          if (g(i) != 0.0) gt.emplace_back(static_cast<int>(offset + i), k, -g(i));
        }
      }
      offset += svec_size(d);
    }
    f.G.resize(offset, num_scalars_);
    f.G.setFromTriplets(gt.begin(), gt.end());
    f.h = Eigen::Map<const Vector>(h.data(), static_cast<Index>(h.size()));

    std::vector<Triplet> at;
    f.b.resize(static_cast<Index>(equalities_.size()) + (infeasible_equalities_ ? 1 : 0));
    for (std::size_t r = 0; r < equalities_.size(); ++r) {
      for (const auto& [k, c] : equalities_[r].terms) {
        if (k >= num_scalars_) throw UnboundedShape("equality references an undeclared variable");
        at.emplace_back(static_cast<int>(r), k, c);
      }
      f.b(static_cast<Index>(r)) = equalities_[r].rhs;
    }
    if (infeasible_equalities_) {
      // 0 = 1 keeps the inconsistency visible to the solver.
      f.b(f.b.size() - 1) = 1.0;
    }
    f.A.resize(f.b.size(), num_scalars_);
    f.A.setFromTriplets(at.begin(), at.end());

    f.c = Vector::Zero(num_scalars_);
    if (objective_) {
      check(*objective_, "objective");
      f.c0 = objective_->constant()(0, 0);
      for (const auto& [k, c] : objective_->terms()) f.c(k) = c(0, 0);
    }
    return f;
  }

  /// Decodes a variable's value from a full assignment vector.
  static Matrix value(const MatrixVar& v, const Vector& x) {
    Matrix out = Matrix::Zero(v.rows(), v.cols());
    for (Index j = 0; j < v.cols(); ++j) {
      for (Index i = 0; i < v.rows(); ++i) {
        const int k = v.index(i, j);
        if (k >= 0) out(i, j) = x(k);
      }
    }
    return out;
  }

  /// Writes `val` into the free entries of `v` within `x` (lower triangle
  /// for symmetric variables).
  static void assign(const MatrixVar& v, const Matrix& val, Vector& x) {
    if (val.rows() != v.rows() || val.cols() != v.cols()) {
      throw DimensionMismatch("assigned value has wrong shape");
    }
    for (Index j = 0; j < v.cols(); ++j) {
      for (Index i = 0; i < v.rows(); ++i) {
        if (v.kind() == VarKind::Symmetric && i < j) continue;
        const int k = v.index(i, j);
        if (k >= 0) x(k) = val(i, j);
      }
    }
  }

 private:
  int num_scalars_ = 0;
  std::size_t next_var_id_ = 0;
  std::vector<PsdConstraint> psd_;
  std::vector<LinearEquation> equalities_;
  std::optional<AffineExpr> objective_;
  bool infeasible_equalities_ = false;
};

inline AffineExpr expr(const MatrixVar& v) { return AffineExpr::of(v); }

/// g − Tr(Q) ⪰ 0 as a 1×1 PSD block.
inline void trace_leq(LmiProblem& problem, const MatrixVar& q, const MatrixVar& g) {
  if (q.kind() != VarKind::Symmetric) throw Error("trace_leq: Q must be symmetric");
  if (g.rows() != 1 || g.cols() != 1) throw DimensionMismatch("trace_leq: g must be scalar");
  problem.add_psd(expr(g) - expr(q).trace(), 0.0, "trace");
}

}  // namespace structh2::lmi
