#pragma once

// Dense kernel shared by every module: symmetric matrix value type, Kronecker
// products, eigenvalue oracles, discrete Lyapunov solves and H2 norms. The
// synthesis code never uses these to build certificates; they exist so that
// each certificate can be checked along an independent path.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "structh2/errors.hpp"

namespace structh2 {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(std::string(what) + " has non-finite entries");
  }
}

inline void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch(std::string(what) + " must be square, got " +
                            std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()));
  }
}

/// Real symmetric matrix. The constructor symmetrizes its argument, so
/// roundoff asymmetry coming out of a solver never leaks into downstream
/// eigenvalue checks.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(const Matrix& m) {
    require_square(m, "SymMatrix");
    m_ = 0.5 * (m + m.transpose());
  }

  static SymMatrix identity(Index n) { return SymMatrix(Matrix::Identity(n, n)); }
  static SymMatrix zero(Index n) { return SymMatrix(Matrix::Zero(n, n)); }

  Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  operator const Matrix&() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

  SymMatrix operator+(const SymMatrix& o) const { return SymMatrix(m_ + o.m_); }
  SymMatrix operator-(const SymMatrix& o) const { return SymMatrix(m_ - o.m_); }
  SymMatrix operator*(double s) const { return SymMatrix(s * m_); }

 private:
  Matrix m_;
};

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Block-diagonal concatenation of two matrices.
inline Matrix blkdiag(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

// Hessenberg reduction followed by shifted QR (Eigen::EigenSolver).
inline double spectral_radius(const Matrix& a) {
  require_square(a, "spectral_radius argument");
  if (a.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw Error("eigenvalue iteration did not converge");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline Vector sym_eigenvalues(const SymMatrix& m) {
  if (m.dim() == 0) return Vector();
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.matrix(), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double min_eig(const SymMatrix& m) {
  if (m.dim() == 0) return std::numeric_limits<double>::infinity();
  return sym_eigenvalues(m).minCoeff();
}

inline double max_eig(const SymMatrix& m) {
  if (m.dim() == 0) return -std::numeric_limits<double>::infinity();
  return sym_eigenvalues(m).maxCoeff();
}

/// PSD test through an LDLᵀ factorization of M + shift·I (Sylvester's law of
/// inertia): the factor's diagonal must be nonnegative. Independent of the
/// eigenvalue path used by min_eig.
inline bool psd_by_factorization(const SymMatrix& m, double shift) {
  const Index n = m.dim();
  Matrix shifted = m.matrix() + shift * Matrix::Identity(n, n);
  Eigen::LDLT<Matrix> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) return false;
  return (ldlt.vectorD().array() >= 0.0).all();
}

/// Symmetric square root of a PSD matrix. Eigenvalues below zero are clipped;
/// `clipped` receives the most negative eigenvalue seen (0 if none).
inline Matrix psd_sqrt(const SymMatrix& m, double* clipped = nullptr) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.matrix());
  Vector ev = es.eigenvalues();
  double worst = 0.0;
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < 0.0) {
      worst = std::min(worst, ev(i));
      ev(i) = 0.0;
    }
  }
  if (clipped != nullptr) *clipped = worst;
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

/// Truncated series Σ_{k<terms} Aᵏ M (Aᵀ)ᵏ. Used as an oracle for solve_dlyap.
inline SymMatrix dlyap_series(const Matrix& a, const SymMatrix& m, int terms) {
  require_square(a, "dlyap_series A");
  Matrix sum = Matrix::Zero(a.rows(), a.cols());
  Matrix term = m.matrix();
  for (int k = 0; k < terms; ++k) {
    sum += term;
    term = a * term * a.transpose();
  }
  return SymMatrix(sum);
}

constexpr double kStabilityMargin = 1e-9;
constexpr Index kKroneckerLyapunovMaxDim = 30;

/// Solves P = A·P·Aᵀ + M for Schur-stable A. Small problems use the
/// vectorized system (I − A⊗A)·vec(P) = vec(M); larger ones use the doubling
/// iteration P ← P + Aₖ P Aₖᵀ, Aₖ ← Aₖ².
inline SymMatrix solve_dlyap(const Matrix& a, const SymMatrix& m) {
  require_square(a, "solve_dlyap A");
  const Index n = a.rows();
  if (m.dim() != n) {
    throw DimensionMismatch("solve_dlyap: M is " + std::to_string(m.dim()) +
                            "x" + std::to_string(m.dim()) + ", A is " +
                            std::to_string(n) + "x" + std::to_string(n));
  }
  if (n == 0) return SymMatrix(Matrix(0, 0));
  const double rho = spectral_radius(a);
  if (!(rho < 1.0 - kStabilityMargin)) {
    throw UnstableMatrix("solve_dlyap: spectral radius " + std::to_string(rho) +
                         " is not below 1");
  }

  Matrix p;
  if (n <= kKroneckerLyapunovMaxDim) {
    const Matrix lhs = Matrix::Identity(n * n, n * n) - kron(a, a);
    Eigen::PartialPivLU<Matrix> lu(lhs);
    const Vector rhs = Eigen::Map<const Vector>(m.matrix().data(), n * n);
    Vector vp = lu.solve(rhs);
    // One step of iterative refinement keeps the residual at roundoff level
    // for spectral radii close to one.
    vp += lu.solve(rhs - lhs * vp);
    p = Eigen::Map<Matrix>(vp.data(), n, n);
  } else {
    p = m.matrix();
    Matrix ak = a;
    for (int it = 0; it < 200; ++it) {
      const Matrix inc = ak * p * ak.transpose();
      p += inc;
      ak = ak * ak;
      if (inc.norm() <= 1e-16 * p.norm()) break;
    }
  }
  return SymMatrix(p);
}

/// Lyapunov residual max|P − A P Aᵀ − M|.
inline double dlyap_residual(const Matrix& a, const SymMatrix& p,
                             const SymMatrix& m) {
  return (p.matrix() - a * p.matrix() * a.transpose() - m.matrix())
      .cwiseAbs()
      .maxCoeff();
}

/// H2 norm of Ccl (zI − Acl)⁻¹ E through the controllability Gramian.
inline double h2_norm(const Matrix& acl, const Matrix& e, const Matrix& ccl) {
  require_square(acl, "h2_norm Acl");
  if (e.rows() != acl.rows() || ccl.cols() != acl.rows()) {
    throw DimensionMismatch("h2_norm: E or Ccl does not conform with Acl");
  }
  const SymMatrix pc = solve_dlyap(acl, SymMatrix(e * e.transpose()));
  const double tr = (ccl * pc.matrix() * ccl.transpose()).trace();
  return std::sqrt(std::max(tr, 0.0));
}

// Dual form through the observability Gramian: Tr(Eᵀ Pₒ E).
inline double h2_norm_observability(const Matrix& acl, const Matrix& e,
                                    const Matrix& ccl) {
  require_square(acl, "h2_norm Acl");
  const SymMatrix po =
      solve_dlyap(acl.transpose(), SymMatrix(ccl.transpose() * ccl));
  const double tr = (e.transpose() * po.matrix() * e).trace();
  return std::sqrt(std::max(tr, 0.0));
}

}  // namespace structh2
