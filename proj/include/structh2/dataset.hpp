#pragma once

// Trajectory data and the set of plants consistent with it.
//
// Data (X₊, X₋, U₋) with X₊ = A*X₋ + B*U₋ + W₋ and a noise bound
// [I; W₋ᵀ]ᵀ Φ [I; W₋ᵀ] ⪰ 0 are compressed into Ψ = M Φ Mᵀ with
// M = [[I, X₊], [0, −X₋], [0, −U₋]]. A plant (A, B) is consistent with the data
// iff [I A B] Ψ [I A B]ᵀ ⪰ 0. When Ψ₂₂ ≺ 0 that set is a matrix ellipsoid
// centred at Zc = −Ψ₂₂⁻¹Ψ₁₂ᵀ (Z = [A B]ᵀ) with radius Δ = Ψ₁₁ − Ψ₁₂Ψ₂₂⁻¹Ψ₁₂ᵀ.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "structh2/csv.hpp"
#include "structh2/errors.hpp"
#include "structh2/linalg.hpp"

namespace structh2 {

struct PlantPair {
  Matrix A;
  Matrix B;

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }

  void validate() const {
    require_square(A, "A");
    if (B.rows() != A.rows()) {
      throw DimensionMismatch("B has " + std::to_string(B.rows()) +
                              " rows, A has " + std::to_string(A.rows()));
    }
    require_finite(A, "A");
    require_finite(B, "B");
  }
};

/// Parameters of the per-sample bound ‖w(t)‖₂ ≤ eps over T samples.
struct BallNoise {
  double eps = 0.0;
  int exponent = 1;
};

/// Noise model Φ ∈ S^{n+T} with Φ₁₁ ⪰ 0 and −Φ₂₂ ≻ 0.
class NoiseModel {
 public:
  NoiseModel(SymMatrix phi, Index n, std::optional<BallNoise> ball = {})
      : phi_(std::move(phi)), n_(n), ball_(ball) {
    if (n_ < 0 || phi_.dim() <= n_) {
      throw DimensionMismatch("noise model: Φ must be (n+T)x(n+T) with T >= 1");
    }
    require_finite(phi_.matrix(), "Φ");
    if (min_eig(phi11()) < -1e-9) {
      throw Error("noise model: Φ₁₁ is not positive semidefinite");
    }
    if (!(min_eig(SymMatrix(-phi22().matrix())) > 0.0)) {
      throw Error("noise model: −Φ₂₂ is not positive definite");
    }
  }

  Index n() const { return n_; }
  Index samples() const { return phi_.dim() - n_; }
  const SymMatrix& phi() const { return phi_; }
  SymMatrix phi11() const { return SymMatrix(phi_.matrix().topLeftCorner(n_, n_)); }
  Matrix phi12() const { return phi_.matrix().topRightCorner(n_, samples()); }
  SymMatrix phi22() const {
    return SymMatrix(phi_.matrix().bottomRightCorner(samples(), samples()));
  }
  const std::optional<BallNoise>& ball() const { return ball_; }

  /// Evaluates [I; Wᵀ]ᵀ Φ [I; Wᵀ] for W ∈ R^{n×T}.
  SymMatrix evaluate(const Matrix& w) const {
    if (w.rows() != n_ || w.cols() != samples()) {
      throw DimensionMismatch("noise matrix does not match the noise model");
    }
    Matrix stacked(n_, n_ + samples());
    stacked << Matrix::Identity(n_, n_), w;
    return SymMatrix(stacked * phi_.matrix() * stacked.transpose());
  }

 private:
  SymMatrix phi_;
  Index n_;
  std::optional<BallNoise> ball_;
};

/// Φ = blkdiag(T·eps·I_n, −I_T). With exponent = 2 the first block is
/// T·eps²·I_n, which is what Σ w(t)w(t)ᵀ ⪯ T·eps²·I actually implies.
inline NoiseModel phi_ball(Index n, Index samples, double eps, int exponent = 1) {
  if (samples < 1) throw Error("T must be >= 1");
  if (!(eps >= 0.0)) throw Error("eps must be nonnegative");
  if (exponent != 1 && exponent != 2) throw Error("exponent must be 1 or 2");
  const double scale = static_cast<double>(samples) *
                       (exponent == 1 ? eps : eps * eps);
  Matrix phi = Matrix::Zero(n + samples, n + samples);
  phi.topLeftCorner(n, n) = scale * Matrix::Identity(n, n);
  phi.bottomRightCorner(samples, samples) = -Matrix::Identity(samples, samples);
  return NoiseModel(SymMatrix(phi), n, BallNoise{eps, exponent});
}

/// Ψ = M Φ Mᵀ with M = [[I, X₊], [0, −X₋], [0, −U₋]].
inline SymMatrix assemble_psi(const Matrix& xplus, const Matrix& xminus,
                              const Matrix& uminus, const NoiseModel& noise) {
  const Index n = xminus.rows();
  const Index m = uminus.rows();
  const Index t = xminus.cols();
  if (xplus.rows() != n || xplus.cols() != t || uminus.cols() != t) {
    throw DimensionMismatch("data matrices disagree in shape");
  }
  if (noise.n() != n || noise.samples() != t) {
    throw DimensionMismatch("noise model is for n=" + std::to_string(noise.n()) +
                            ", T=" + std::to_string(noise.samples()) +
                            " but data has n=" + std::to_string(n) +
                            ", T=" + std::to_string(t));
  }
  Matrix mm = Matrix::Zero(2 * n + m, n + t);
  mm.topLeftCorner(n, n).setIdentity();
  mm.topRightCorner(n, t) = xplus;
  mm.block(n, n, n, t) = -xminus;
  mm.block(2 * n, n, m, t) = -uminus;
  return SymMatrix(mm * noise.phi().matrix() * mm.transpose());
}

/// Data matrices with their noise model; Ψ is assembled on construction and
/// the batch is immutable afterwards.
class DataBatch {
 public:
  DataBatch(Matrix xminus, Matrix uminus, Matrix xplus, NoiseModel noise)
      : xminus_(std::move(xminus)),
        uminus_(std::move(uminus)),
        xplus_(std::move(xplus)),
        noise_(std::move(noise)),
        psi_(assemble_psi(xplus_, xminus_, uminus_, noise_)) {
    require_finite(xminus_, "X₋");
    require_finite(uminus_, "U₋");
    require_finite(xplus_, "X₊");
  }

  Index n() const { return xminus_.rows(); }
  Index m() const { return uminus_.rows(); }
  Index samples() const { return xminus_.cols(); }

  const Matrix& xminus() const { return xminus_; }
  const Matrix& uminus() const { return uminus_; }
  const Matrix& xplus() const { return xplus_; }
  const NoiseModel& noise() const { return noise_; }
  const SymMatrix& psi() const { return psi_; }

  SymMatrix psi11() const { return SymMatrix(psi_.matrix().topLeftCorner(n(), n())); }
  Matrix psi12() const { return psi_.matrix().topRightCorner(n(), n() + m()); }
  SymMatrix psi22() const {
    return SymMatrix(psi_.matrix().bottomRightCorner(n() + m(), n() + m()));
  }

  /// True iff Ψ₂₂ ≺ 0 (equivalently [X₋; U₋] has full row rank).
  bool full_rank() const {
    Eigen::LLT<Matrix> llt(-psi22().matrix());
    return llt.info() == Eigen::Success &&
           min_eig(SymMatrix(-psi22().matrix())) > 1e-12 * (1.0 + psi_.matrix().norm());
  }

  /// First `count` samples; only ball noise models can be re-derived for a
  /// shorter horizon.
  DataBatch prefix(Index count) const {
    if (count < 1 || count > samples()) {
      throw Error("prefix length must be in [1, " + std::to_string(samples()) + "]");
    }
    if (!noise_.ball()) {
      throw Error("prefix requires a ball noise model");
    }
    return DataBatch(xminus_.leftCols(count), uminus_.leftCols(count),
                     xplus_.leftCols(count),
                     phi_ball(n(), count, noise_.ball()->eps, noise_.ball()->exponent));
  }

 private:
  Matrix xminus_;
  Matrix uminus_;
  Matrix xplus_;
  NoiseModel noise_;
  SymMatrix psi_;
};

// ---------------------------------------------------------------------------
// Simulation

enum class NoiseShape { Ball, Sphere };

struct Simulation {
  DataBatch batch;
  Matrix wminus;
};

/// i.i.d. uniform[−amplitude, amplitude] excitation, generated column by
/// column so that shorter horizons are prefixes of longer ones.
inline Matrix uniform_inputs(Index m, Index samples, double amplitude,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  Matrix u(m, samples);
  for (Index t = 0; t < samples; ++t) {
    for (Index i = 0; i < m; ++i) u(i, t) = dist(rng);
  }
  return u;
}

/// Runs x(t+1) = A*x(t) + B*u(t) + w(t) with w(t) drawn uniformly from the
/// 2-norm ball of radius eps (or its surface). Φ is phi_ball(n, T, eps,
/// exponent).
inline Simulation simulate(const PlantPair& truth, const Vector& x0,
                           const Matrix& inputs, double eps, std::uint64_t seed,
                           int exponent = 1,
                           NoiseShape shape = NoiseShape::Ball) {
  truth.validate();
  const Index n = truth.n();
  const Index m = truth.m();
  if (x0.size() != n) throw DimensionMismatch("x0 has wrong length");
  if (inputs.rows() != m) throw DimensionMismatch("inputs have wrong row count");
  if (!(eps >= 0.0)) throw Error("eps must be nonnegative");
  const Index samples = inputs.cols();
  if (samples < 1) throw Error("T must be >= 1");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Matrix xs(n, samples + 1);
  Matrix w(n, samples);
  xs.col(0) = x0;
  for (Index t = 0; t < samples; ++t) {
    Vector dir(n);
    for (Index i = 0; i < n; ++i) dir(i) = gauss(rng);
    const double len = dir.norm();
    if (len > 0.0) dir /= len;
    const double u = unit(rng);
    const double radius =
        shape == NoiseShape::Sphere
            ? eps
            : eps * std::pow(u, 1.0 / static_cast<double>(n));
    w.col(t) = radius * dir;
    xs.col(t + 1) = truth.A * xs.col(t) + truth.B * inputs.col(t) + w.col(t);
  }
  Matrix xminus = xs.leftCols(samples);
  Matrix xplus = xs.rightCols(samples);
  return Simulation{DataBatch(std::move(xminus), inputs, std::move(xplus),
                              phi_ball(n, samples, eps, exponent)),
                    std::move(w)};
}

/// max |X₊ − A X₋ − B U₋ − W₋|, evaluated column by column with the same
/// expression simulate() uses, so a simulated batch gives exactly 0.
inline double data_equation_residual(const PlantPair& plant,
                                     const DataBatch& batch,
                                     const Matrix& wminus) {
  double worst = 0.0;
  for (Index t = 0; t < batch.samples(); ++t) {
    const Vector next = plant.A * batch.xminus().col(t) +
                        plant.B * batch.uminus().col(t) + wminus.col(t);
    worst = std::max(worst, (batch.xplus().col(t) - next).cwiseAbs().maxCoeff());
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Consistency

/// min_eig([I A B] Ψ [I A B]ᵀ); the plant is consistent iff this is ≥ 0.
inline double consistency(const DataBatch& batch, const PlantPair& plant) {
  const Index n = batch.n();
  const Index m = batch.m();
  if (plant.A.rows() != n || plant.A.cols() != n || plant.B.rows() != n ||
      plant.B.cols() != m) {
    throw DimensionMismatch("plant does not match the data dimensions");
  }
  Matrix nmat(n, 2 * n + m);
  nmat << Matrix::Identity(n, n), plant.A, plant.B;
  return min_eig(SymMatrix(nmat * batch.psi().matrix() * nmat.transpose()));
}

/// Parametrization Z = Zc + (−Ψ₂₂)^{-1/2} C Δ^{1/2} of the consistency set.
/// Contractions ‖C‖₂ ≤ 1 give members; ‖C‖₂ = 1 gives boundary points.
class ConsistencySet {
 public:
  explicit ConsistencySet(const DataBatch& batch) : n_(batch.n()), m_(batch.m()) {
    const Matrix neg22 = -batch.psi22().matrix();
    Eigen::LLT<Matrix> llt(neg22);
    if (llt.info() != Eigen::Success || !batch.full_rank()) {
      throw RankDeficientData(
          "Ψ₂₂ is not negative definite; [X₋; U₋] lacks full row rank");
    }
    const Matrix psi12 = batch.psi12();
    center_ = llt.solve(psi12.transpose());  // −Ψ₂₂⁻¹Ψ₁₂ᵀ
    radius_ = SymMatrix(batch.psi11().matrix() +
                        psi12 * llt.solve(psi12.transpose()));
    const double scale = 1.0 + batch.psi11().matrix().norm();
    const double lo = min_eig(radius_);
    if (lo < -1e-8 * scale) {
      throw EmptyInterior("Schur slack Ψ₁₁ − Ψ₁₂Ψ₂₂⁻¹Ψ₁₂ᵀ has eigenvalue " +
                          std::to_string(lo));
    }
    radius_sqrt_ = psd_sqrt(radius_, &clipped_);
    Eigen::SelfAdjointEigenSolver<Matrix> es(neg22);
    neg22_inv_sqrt_ = es.eigenvectors() *
                      es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                      es.eigenvectors().transpose();
  }

  Index n() const { return n_; }
  Index m() const { return m_; }

  /// Zc ∈ R^{(n+m)×n}.
  const Matrix& center() const { return center_; }
  /// Δ = Ψ₁₁ − Ψ₁₂Ψ₂₂⁻¹Ψ₁₂ᵀ.
  const SymMatrix& radius() const { return radius_; }
  /// Most negative eigenvalue of Δ clipped to zero (0 when none).
  double clipped_eigenvalue() const { return clipped_; }
  bool clip_warning() const { return clipped_ < -1e-8; }

  static PlantPair split(const Matrix& z, Index n, Index m) {
    return PlantPair{z.topRows(n).transpose(), z.bottomRows(m).transpose()};
  }

  PlantPair center_plant() const { return split(center_, n_, m_); }

  /// Plant at contraction C ∈ R^{(n+m)×n}.
  PlantPair plant_at(const Matrix& c) const {
    if (c.rows() != n_ + m_ || c.cols() != n_) {
      throw DimensionMismatch("contraction must be (n+m)×n");
    }
    return split(center_ + neg22_inv_sqrt_ * c * radius_sqrt_, n_, m_);
  }

  /// Plant with Z − Zc scaled by `factor` relative to contraction C.
  PlantPair plant_at_scaled(const Matrix& c, double factor) const {
    return split(center_ + factor * (neg22_inv_sqrt_ * c * radius_sqrt_), n_, m_);
  }

 private:
  Index n_;
  Index m_;
  Matrix center_;
  SymMatrix radius_;
  Matrix radius_sqrt_;
  Matrix neg22_inv_sqrt_;
  double clipped_ = 0.0;
};

enum class SampleMode { Interior, Boundary };

/// Random contraction: Gaussian matrix normalized to unit spectral norm,
/// then shrunk by a uniform factor in interior mode.
inline Matrix random_contraction(Index rows, Index cols, SampleMode mode,
                                 std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix c(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) c(i, j) = gauss(rng);
  }
  Eigen::JacobiSVD<Matrix> svd(c);
  const double s = svd.singularValues()(0);
  if (s > 0.0) c /= s;
  if (mode == SampleMode::Interior) c *= unit(rng);
  return c;
}

inline std::vector<PlantPair> sample_consistent(const DataBatch& batch,
                                                std::size_t count,
                                                SampleMode mode,
                                                std::uint64_t seed) {
  const ConsistencySet set(batch);
  std::mt19937_64 rng(seed);
  std::vector<PlantPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(set.plant_at(
        random_contraction(batch.n() + batch.m(), batch.n(), mode, rng)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch directory: xminus.csv, uminus.csv, xplus.csv and either noise.json
// (ball model) or phi.csv (full symmetric Φ).

inline void write_batch(const std::filesystem::path& dir, const DataBatch& batch) {
  std::filesystem::create_directories(dir);
  csv::write_matrix(dir / "xminus.csv", batch.xminus());
  csv::write_matrix(dir / "uminus.csv", batch.uminus());
  csv::write_matrix(dir / "xplus.csv", batch.xplus());
  if (const auto& ball = batch.noise().ball()) {
    nlohmann::ordered_json j;
    j["type"] = "ball";
    j["eps"] = ball->eps;
    j["T"] = batch.samples();
    j["exponent"] = ball->exponent;
    std::ofstream(dir / "noise.json") << j.dump(2) << '\n';
    std::filesystem::remove(dir / "phi.csv");
  } else {
    csv::write_matrix(dir / "phi.csv", batch.noise().phi().matrix());
    std::filesystem::remove(dir / "noise.json");
  }
}

inline DataBatch read_batch(const std::filesystem::path& dir) {
  Matrix xminus = csv::read_matrix(dir / "xminus.csv");
  Matrix uminus = csv::read_matrix(dir / "uminus.csv");
  Matrix xplus = csv::read_matrix(dir / "xplus.csv");
  const Index n = xminus.rows();
  if (std::filesystem::exists(dir / "noise.json")) {
    std::ifstream in(dir / "noise.json");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError((dir / "noise.json").string() + ": " + e.what());
    }
    if (j.value("type", std::string()) != "ball") {
      throw ParseError("noise.json: only type \"ball\" is supported");
    }
    const double eps = j.at("eps").get<double>();
    const Index t = j.value("T", static_cast<Index>(xminus.cols()));
    const int exponent = j.value("exponent", 1);
    if (t != xminus.cols()) {
      throw ParseError("noise.json: T does not match the data length");
    }
    return DataBatch(std::move(xminus), std::move(uminus), std::move(xplus),
                     phi_ball(n, t, eps, exponent));
  }
  if (std::filesystem::exists(dir / "phi.csv")) {
    const Matrix phi = csv::read_matrix(dir / "phi.csv");
    require_square(phi, "phi.csv");
    if ((phi - phi.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + phi.norm())) {
      throw ParseError("phi.csv is not symmetric");
    }
    return DataBatch(std::move(xminus), std::move(uminus), std::move(xplus),
                     NoiseModel(SymMatrix(phi), n));
  }
  throw ParseError(dir.string() + ": neither noise.json nor phi.csv present");
}

}  // namespace structh2
