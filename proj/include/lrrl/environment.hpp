#pragma once

// Bandit worlds: the planted low-rank Gaussian-design model and the generic
// interface the online loop plays against.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrrl/errors.hpp"
#include "lrrl/linalg.hpp"
#include "lrrl/rng.hpp"

namespace lrrl {

struct ProblemConfig {
  std::size_t dimension = 20;  // d
  std::size_t tasks = 30;      // T
  std::size_t rank = 2;        // r
  std::size_t arms = 5;        // K
  std::size_t horizon = 40;    // N, rounds per task
  double noise_variance = 1e-6;
  std::uint64_t seed = 0;
  /// Mean of the arm-feature distribution; empty means zero.
  Vector arm_mean;

  double noise_std() const { return std::sqrt(noise_variance); }

  void validate() const {
    if (dimension == 0 || tasks == 0) throw ParameterError("problem: d and T must be positive");
    if (rank == 0 || rank > std::min(dimension, tasks))
      throw ParameterError("problem: r must satisfy 1 <= r <= min(d, T)");
    if (arms == 0) throw ParameterError("problem: K must be >= 1");
    if (horizon == 0) throw ParameterError("problem: N must be >= 1");
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance))
      throw ParameterError("problem: noise_variance must be finite and >= 0");
    if (arm_mean.size() != 0 && arm_mean.size() != static_cast<Index>(dimension))
      throw ParameterError("problem: arm_mean length must equal d");
  }

  friend bool operator==(const ProblemConfig& a, const ProblemConfig& b) {
    return a.dimension == b.dimension && a.tasks == b.tasks && a.rank == b.rank &&
           a.arms == b.arms && a.horizon == b.horizon && a.noise_variance == b.noise_variance &&
           a.seed == b.seed && a.arm_mean.size() == b.arm_mean.size() && a.arm_mean == b.arm_mean;
  }
};

/// Planted parameter Θ* = B*W* with its spectrum.
struct GroundTruth {
  OrthonormalBasis b_star;
  Matrix w_star;
  Matrix theta_star;
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  double kappa = 0.0;
  /// Smallest μ with ‖w*_t‖² ≤ μ²(r/T)σ_max² for every task.
  double mu = 0.0;

  /// Builds Θ* and its spectrum from the factors. σ(Θ*) = σ(W*) because B*
  /// has orthonormal columns.
  static GroundTruth from_factors(OrthonormalBasis b, Matrix w) {
    if (b.cols() != w.rows()) throw ParameterError("ground truth: cols(B*) != rows(W*)");
    require_finite(w, "W*");
    Matrix theta = b.matrix() * w;
    const Eigen::JacobiSVD<Matrix> svd(w);
    const Vector sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    if (!(smin > 0.0)) throw ParameterError("ground truth: W* is rank deficient");
    const auto r = static_cast<double>(w.rows());
    const auto t = static_cast<double>(w.cols());
    const double max_col = w.colwise().norm().maxCoeff();
    GroundTruth g{std::move(b), std::move(w), std::move(theta), smax, smin, smax / smin, 0.0};
    g.mu = max_col * std::sqrt(t / r) / smax;
    return g;
  }

  /// σ_η² / min_t ‖θ*_t‖².
  double noise_to_signal(double noise_variance) const {
    const double min_sq = theta_star.colwise().squaredNorm().minCoeff();
    return noise_variance / min_sq;
  }

  Vector theta(Index task) const { return theta_star.col(task); }
};

/// B* from QR of a d×r standard Gaussian matrix; W* i.i.d. N(0,1).
inline GroundTruth generate_ground_truth(const ProblemConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto d = static_cast<Index>(cfg.dimension);
  const auto t = static_cast<Index>(cfg.tasks);
  const auto r = static_cast<Index>(cfg.rank);
  for (;;) {
    Matrix g = rng.gaussian_matrix(d, r);
    Matrix w = rng.gaussian_matrix(r, t);
    try {
      QrResult qr = qr_decompose(g);
      return GroundTruth::from_factors(std::move(qr.q), std::move(w));
    } catch (const DegenerateInputError&) {
      // Probability-zero event for Gaussian draws; redraw.
    } catch (const ParameterError&) {
    }
  }
}

/// Spectrum-controlled variant: Θ* = B* diag(σ) Vᵀ with B*, V Haar-like
/// orthonormal factors, so κ and the singular values are known exactly.
inline GroundTruth generate_ground_truth_with_spectrum(const ProblemConfig& cfg,
                                                       std::span<const double> singular_values,
                                                       Rng& rng) {
  cfg.validate();
  if (singular_values.size() != cfg.rank)
    throw ParameterError("ground truth: need exactly r singular values");
  for (double s : singular_values)
    if (!(s > 0.0)) throw ParameterError("ground truth: singular values must be positive");
  const auto d = static_cast<Index>(cfg.dimension);
  const auto t = static_cast<Index>(cfg.tasks);
  const auto r = static_cast<Index>(cfg.rank);
  QrResult b = qr_decompose(rng.gaussian_matrix(d, r));
  QrResult v = qr_decompose(rng.gaussian_matrix(t, r));
  Vector sigma(r);
  for (Index i = 0; i < r; ++i) sigma(i) = singular_values[static_cast<std::size_t>(i)];
  Matrix w = sigma.asDiagonal() * v.q.matrix().transpose();
  return GroundTruth::from_factors(std::move(b.q), std::move(w));
}

/// The K candidate feature vectors for one task in one round, stored as the
/// columns of a d×K matrix.
struct ArmSet {
  Matrix features;

  Index count() const { return features.cols(); }
  Index dimension() const { return features.rows(); }
  auto arm(Index k) const { return features.col(k); }
};

/// K i.i.d. N(μ, I_d) vectors (μ = 0 unless cfg.arm_mean is set).
inline ArmSet sample_arm_set(const ProblemConfig& cfg, Rng& rng) {
  ArmSet set{rng.gaussian_matrix(static_cast<Index>(cfg.dimension), static_cast<Index>(cfg.arms))};
  if (cfg.arm_mean.size() != 0) set.features.colwise() += cfg.arm_mean;
  return set;
}

/// ⟨φ, θ*_t⟩ + η with η ~ N(0, noise_std²).
inline double reward(const Vector& phi, const Vector& theta, double noise_std, Rng& rng) {
  if (phi.size() != theta.size()) throw ParameterError("reward: dimension mismatch");
  const double mean = phi.dot(theta);
  if (noise_std == 0.0) return mean;
  return mean + noise_std * rng.normal();
}

/// One round's candidates for one task, with each arm's expected reward.
struct RoundDraw {
  ArmSet arms;
  Vector expected;
};

/// What the online loop plays against. Implementations are immutable after
/// construction; all randomness flows through caller-owned streams.
class BanditEnvironment {
 public:
  virtual ~BanditEnvironment() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::size_t task_count() const = 0;
  virtual double noise_std() const = 0;
  virtual RoundDraw draw(std::size_t task, Rng& arm_rng) const = 0;
  /// Planted parameters, when the world has them.
  virtual const GroundTruth* truth() const { return nullptr; }

  double observe(const RoundDraw& draw, Index arm, Rng& noise_rng) const {
    const double sd = noise_std();
    const double mean = draw.expected(arm);
    return sd == 0.0 ? mean : mean + sd * noise_rng.normal();
  }
};

class SyntheticEnvironment final : public BanditEnvironment {
 public:
  SyntheticEnvironment(ProblemConfig cfg, GroundTruth truth)
      : cfg_(std::move(cfg)), truth_(std::move(truth)) {
    cfg_.validate();
    if (truth_.theta_star.rows() != static_cast<Index>(cfg_.dimension) ||
        truth_.theta_star.cols() != static_cast<Index>(cfg_.tasks))
      throw ParameterError("synthetic environment: Θ* shape does not match config");
  }

  std::size_t dimension() const override { return cfg_.dimension; }
  std::size_t task_count() const override { return cfg_.tasks; }
  double noise_std() const override { return cfg_.noise_std(); }
  const GroundTruth* truth() const override { return &truth_; }
  const ProblemConfig& config() const { return cfg_; }

  RoundDraw draw(std::size_t task, Rng& arm_rng) const override {
    ArmSet arms = sample_arm_set(cfg_, arm_rng);
    Vector expected = arms.features.transpose() * truth_.theta_star.col(static_cast<Index>(task));
    return RoundDraw{std::move(arms), std::move(expected)};
  }

 private:
  ProblemConfig cfg_;
  GroundTruth truth_;
};

}  // namespace lrrl
