#pragma once

// Parameter recovery for the shared low-rank model y = φᵀ B w_t + η:
// truncated spectral initialization, AltGDMin epochs (exact min over W,
// one projected gradient step on B), and the MoM / alternating-GD baselines.
//
// Gradient convention: grad_b returns Σ_t Φ_tᵀ(Φ_t B w_t − y_t) w_tᵀ, which is
// half the derivative of cost(). Step sizes are expressed against that
// half-gradient, so γ = c_γ / σ_max² carries over unchanged.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrrl/environment.hpp"
#include "lrrl/errors.hpp"
#include "lrrl/linalg.hpp"
#include "lrrl/rng.hpp"

namespace lrrl {

/// One task's data for one epoch: stacked feature rows and rewards.
struct TaskBatch {
  std::size_t task_id = 0;
  Matrix phi;  // n × d
  Vector y;    // n

  Index samples() const { return phi.rows(); }

  void validate() const {
    if (phi.rows() != y.size()) throw ParameterError("task batch: rows(Phi) != length(y)");
    if (phi.rows() < 1) throw ParameterError("task batch: needs at least one sample");
  }
};

using Batches = std::vector<TaskBatch>;

/// Disjoint contiguous row ranges of the same source batches.
struct SplitBatches {
  std::optional<Batches> init_part;
  std::vector<Batches> gd_parts;
};

struct FactorEstimate {
  OrthonormalBasis b;
  Matrix w;  // r × T

  Matrix theta() const { return b.matrix() * w; }
};

struct GdConfig {
  std::size_t iterations = 200;  // L
  double c_gamma = 0.4;
  /// Known σ*_max; when unset the caller's running estimate is used.
  std::optional<double> sigma_max;
  double trunc_multiplier = 9.0;  // C̃
  bool sample_split = true;
  std::size_t svd_iterations = kDefaultSubspaceIterations;

  /// c_γ = 0 is accepted (frozen basis, useful for diagnostics).
  void validate() const {
    if (iterations < 1) throw ParameterError("gd: L must be >= 1");
    if (!(c_gamma >= 0.0 && c_gamma <= 0.5)) throw ParameterError("gd: c_gamma must lie in [0, 0.5]");
    if (sigma_max && !(*sigma_max > 0.0)) throw ParameterError("gd: sigma_max must be positive");
    if (!(trunc_multiplier > 0.0)) throw ParameterError("gd: trunc_multiplier must be positive");
    if (svd_iterations < 1) throw ParameterError("gd: svd_iterations must be >= 1");
  }

  bool operator==(const GdConfig&) const = default;
};

struct IterationDiagnostics {
  std::size_t iteration = 0;  // 1-based ℓ
  double cost = 0.0;          // on the W-update part, after min_w
  std::optional<double> subspace_error;  // SE(B_ℓ, B*)
  std::optional<double> err_theta;       // ‖B_{ℓ-1}W_ℓ − Θ*‖_F / ‖Θ*‖_F
};

struct EpochResult {
  FactorEstimate estimate;
  std::vector<IterationDiagnostics> iterations;
};

/// ‖Θ̂ − Θ*‖_F / ‖Θ*‖_F.
inline double relative_error(const Matrix& theta_hat, const Matrix& theta_star) {
  if (theta_hat.rows() != theta_star.rows() || theta_hat.cols() != theta_star.cols())
    throw ParameterError("relative_error: shape mismatch");
  return (theta_hat - theta_star).norm() / theta_star.norm();
}

namespace detail {

inline void check_batches(const Batches& batches, Index d) {
  if (batches.empty()) throw ParameterError("no task batches");
  for (const auto& b : batches) {
    b.validate();
    if (b.phi.cols() != d) throw ParameterError("task batch: feature dimension mismatch");
  }
}

inline double mean_rows(const Batches& batches) {
  double total = 0.0;
  for (const auto& b : batches) total += static_cast<double>(b.samples());
  return total / static_cast<double>(batches.size());
}

inline Batches concat_parts(const std::vector<Batches>& parts) {
  Batches out = parts.front();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    for (std::size_t t = 0; t < out.size(); ++t) {
      const auto& src = parts[p][t];
      Matrix phi(out[t].phi.rows() + src.phi.rows(), out[t].phi.cols());
      phi << out[t].phi, src.phi;
      Vector y(out[t].y.size() + src.y.size());
      y << out[t].y, src.y;
      out[t].phi = std::move(phi);
      out[t].y = std::move(y);
    }
  }
  return out;
}

}  // namespace detail

/// Splits every batch into `parts` contiguous row ranges (plus one leading
/// init range when `include_init`). Sizes differ by at most one row; the
/// first ranges absorb the remainder.
inline SplitBatches sample_split(const Batches& batches, std::size_t parts, bool include_init) {
  if (parts < 1) throw ParameterError("sample_split: parts must be >= 1");
  if (batches.empty()) throw ParameterError("sample_split: no batches");
  const std::size_t total = parts + (include_init ? 1 : 0);
  for (const auto& b : batches) {
    b.validate();
    if (static_cast<std::size_t>(b.samples()) < total)
      throw ParameterError("sample_split: task " + std::to_string(b.task_id) + " has " +
                           std::to_string(b.samples()) + " rows, needs at least " +
                           std::to_string(total));
  }
  std::vector<Batches> pieces(total, Batches(batches.size()));
  for (std::size_t t = 0; t < batches.size(); ++t) {
    const auto& src = batches[t];
    const auto n = static_cast<std::size_t>(src.samples());
    const std::size_t base = n / total;
    const std::size_t extra = n % total;
    std::size_t start = 0;
    for (std::size_t p = 0; p < total; ++p) {
      const std::size_t len = base + (p < extra ? 1 : 0);
      auto& dst = pieces[p][t];
      dst.task_id = src.task_id;
      dst.phi = src.phi.middleRows(static_cast<Index>(start), static_cast<Index>(len));
      dst.y = src.y.segment(static_cast<Index>(start), static_cast<Index>(len));
      start += len;
    }
  }
  SplitBatches out;
  auto first = pieces.begin();
  if (include_init) out.init_part = std::move(*first++);
  out.gd_parts.assign(std::make_move_iterator(first), std::make_move_iterator(pieces.end()));
  return out;
}

/// α = C̃ · mean of y² over every sample of every task.
inline double truncation_threshold(const Batches& batches, double trunc_multiplier) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& b : batches) {
    sum += b.y.squaredNorm();
    count += static_cast<std::size_t>(b.y.size());
  }
  if (count == 0) throw ParameterError("truncation_threshold: no samples");
  return trunc_multiplier * sum / static_cast<double>(count);
}

/// y ∘ 1{|y| ≤ √α}. The boundary is kept.
inline Vector truncate_rewards(const Vector& y, double alpha) {
  const double limit = std::sqrt(alpha);
  return y.unaryExpr([limit](double v) { return std::abs(v) <= limit ? v : 0.0; });
}

struct SpectralInit {
  OrthonormalBasis basis;  // B̂⁰
  Matrix theta0;           // Θ̂₀, d × T
  bool gap_warning = false;
};

/// Θ̂₀ with column t = (1/n_t) Φ_tᵀ y_t,trunc, then its top-r left singular
/// vectors.
inline SpectralInit spectral_init(const Batches& batches, double alpha, std::size_t r,
                                  std::size_t svd_iterations, Rng& rng) {
  if (batches.empty()) throw ParameterError("spectral_init: no batches");
  if (!(alpha > 0.0)) throw ParameterError("spectral_init: alpha must be positive");
  const Index d = batches.front().phi.cols();
  detail::check_batches(batches, d);
  const auto tasks = static_cast<Index>(batches.size());
  if (r == 0 || static_cast<Index>(r) > std::min(d, tasks))
    throw ParameterError("spectral_init: r must satisfy 1 <= r <= min(d, T)");
  Matrix theta0(d, tasks);
  for (Index t = 0; t < tasks; ++t) {
    const auto& b = batches[static_cast<std::size_t>(t)];
    theta0.col(t) = b.phi.transpose() * truncate_rewards(b.y, alpha) / static_cast<double>(b.samples());
  }
  SubspaceResult svd = top_r_left_singular_vectors(theta0, r, svd_iterations, rng);
  return SpectralInit{std::move(svd.basis), std::move(theta0), svd.gap_warning};
}

/// Σ_t Σ_n (y_{n,t} − φ_{n,t}ᵀ B w_t)².
inline double cost(const FactorEstimate& est, const Batches& batches) {
  if (static_cast<Index>(batches.size()) != est.w.cols())
    throw ParameterError("cost: task count mismatch");
  double total = 0.0;
  for (std::size_t t = 0; t < batches.size(); ++t) {
    const Vector theta = est.b.matrix() * est.w.col(static_cast<Index>(t));
    total += (batches[t].y - batches[t].phi * theta).squaredNorm();
  }
  return total;
}

/// Σ_t Φ_tᵀ(Φ_t B w_t − y_t) w_tᵀ  (= ½ ∇_B cost).
inline Matrix grad_b(const FactorEstimate& est, const Batches& batches) {
  if (static_cast<Index>(batches.size()) != est.w.cols())
    throw ParameterError("grad_b: task count mismatch");
  const Matrix& b = est.b.matrix();
  Matrix grad = Matrix::Zero(b.rows(), b.cols());
  for (std::size_t t = 0; t < batches.size(); ++t) {
    const auto w = est.w.col(static_cast<Index>(t));
    const Vector residual = batches[t].phi * (b * w) - batches[t].y;
    grad.noalias() += (batches[t].phi.transpose() * residual) * w.transpose();
  }
  return grad;
}

/// Column t: Bᵀ Φ_tᵀ(Φ_t B w_t − y_t)  (= ½ ∇_W cost).
inline Matrix grad_w(const FactorEstimate& est, const Batches& batches) {
  if (static_cast<Index>(batches.size()) != est.w.cols())
    throw ParameterError("grad_w: task count mismatch");
  const Matrix& b = est.b.matrix();
  Matrix grad(est.w.rows(), est.w.cols());
  for (std::size_t t = 0; t < batches.size(); ++t) {
    const auto w = est.w.col(static_cast<Index>(t));
    const Vector residual = batches[t].phi * (b * w) - batches[t].y;
    grad.col(static_cast<Index>(t)) = b.transpose() * (batches[t].phi.transpose() * residual);
  }
  return grad;
}

/// Column t = argmin_w ‖y_t − Φ_t B w‖, solved independently per task.
inline Matrix min_w(const OrthonormalBasis& b, const Batches& batches) {
  detail::check_batches(batches, b.rows());
  Matrix w(b.cols(), static_cast<Index>(batches.size()));
  for (std::size_t t = 0; t < batches.size(); ++t) {
    const Matrix design = batches[t].phi * b.matrix();
    try {
      w.col(static_cast<Index>(t)) = least_squares(design, batches[t].y);
    } catch (const DegenerateInputError& e) {
      throw DegenerateInputError(e.column(), "min_w: task " + std::to_string(batches[t].task_id) +
                                                 " has a rank-deficient design");
    } catch (const ParameterError& e) {
      throw ParameterError("min_w: task " + std::to_string(batches[t].task_id) + ": " + e.what());
    }
  }
  return w;
}

/// One epoch of AltGDMin (L iterations of min over W then a projected
/// gradient step on B).
///
/// With 2L gd parts, iteration ℓ fits W on part ℓ and takes the gradient on
/// part L + ℓ. With a single part, every iteration reuses it. The step is
/// γ / n with γ = c_γ / σ̂_max² and n the per-task row count of the
/// gradient part. `sigma_max_hat` is ignored when `gd.sigma_max` is set.
inline EpochResult altgdmin_epoch(const OrthonormalBasis& b_in, const SplitBatches& split,
                                  const GdConfig& gd, double sigma_max_hat,
                                  const GroundTruth* reference = nullptr) {
  gd.validate();
  const std::size_t L = gd.iterations;
  const bool reuse = split.gd_parts.size() == 1;
  if (!reuse && split.gd_parts.size() != 2 * L)
    throw ParameterError("altgdmin_epoch: expected 1 or 2L = " + std::to_string(2 * L) +
                         " gd parts, got " + std::to_string(split.gd_parts.size()));
  const double sigma = gd.sigma_max.value_or(sigma_max_hat);
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw ParameterError("altgdmin_epoch: sigma_max estimate must be positive and finite");
  const double gamma = gd.c_gamma / (sigma * sigma);
  const double theta_norm = reference ? reference->theta_star.norm() : 0.0;

  OrthonormalBasis b = b_in;
  Matrix w;
  std::vector<IterationDiagnostics> trace;
  trace.reserve(L);
  for (std::size_t l = 1; l <= L; ++l) {
    const Batches& fit_part = reuse ? split.gd_parts[0] : split.gd_parts[l - 1];
    const Batches& grad_part = reuse ? split.gd_parts[0] : split.gd_parts[L + l - 1];
    w = min_w(b, fit_part);
    FactorEstimate current{b, w};
    IterationDiagnostics diag;
    diag.iteration = l;
    diag.cost = cost(current, fit_part);
    if (reference) diag.err_theta = (current.theta() - reference->theta_star).norm() / theta_norm;

    const Matrix grad = grad_b(current, grad_part);
    if (!grad.allFinite()) throw DivergenceError(l, "altgdmin_epoch: non-finite gradient");
    const Matrix stepped = b.matrix() - (gamma / detail::mean_rows(grad_part)) * grad;
    b = qr_decompose(stepped).q;
    if (reference) diag.subspace_error = subspace_error(b, reference->b_star);
    trace.push_back(diag);
  }
  return EpochResult{FactorEstimate{std::move(b), std::move(w)}, std::move(trace)};
}

/// (1 / total samples) Σ y² φφᵀ; exactly symmetric.
inline Matrix moment_matrix(const Batches& batches) {
  const Index d = batches.empty() ? 0 : batches.front().phi.cols();
  detail::check_batches(batches, d);
  Matrix m = Matrix::Zero(d, d);
  double count = 0.0;
  for (const auto& b : batches) {
    const Matrix weighted = b.phi.array().colwise() * b.y.array().abs();
    m.selfadjointView<Eigen::Lower>().rankUpdate(weighted.transpose());
    count += static_cast<double>(b.samples());
  }
  m = m.selfadjointView<Eigen::Lower>();
  return m / count;
}

struct MomResult {
  FactorEstimate estimate;
  bool gap_warning = false;
};

/// Method of moments: top-r eigenvectors of the y²-weighted second moment,
/// then per-task least squares.
inline MomResult mom_estimate(const Batches& batches, std::size_t r, std::size_t svd_iterations,
                              Rng& rng) {
  const Matrix m = moment_matrix(batches);
  SubspaceResult svd = top_r_left_singular_vectors(m, r, svd_iterations, rng);
  Matrix w = min_w(svd.basis, batches);
  return MomResult{FactorEstimate{std::move(svd.basis), std::move(w)}, svd.gap_warning};
}

/// Plain alternating gradient descent on (B, W) with one shared step size:
/// W ← W − (step/n)·grad_w, then B ← QR(B − (step/n)·grad_b), n the per-task
/// sample count. W is carried through the QR as R W so the product BW is
/// unchanged by the re-orthonormalization. The bandit loop uses
/// step = c_γ / σ̂_max², the same γ as AltGDMin.
inline EpochResult altgd_baseline(const OrthonormalBasis& b_in, const Matrix& w_in,
                                  const Batches& batches, double step, std::size_t iterations,
                                  const GroundTruth* reference = nullptr) {
  detail::check_batches(batches, b_in.rows());
  if (w_in.rows() != b_in.cols() || w_in.cols() != static_cast<Index>(batches.size()))
    throw ParameterError("altgd_baseline: W shape mismatch");
  if (!(step >= 0.0) || !std::isfinite(step))
    throw ParameterError("altgd_baseline: step must be finite and nonnegative");
  const double rate = step / detail::mean_rows(batches);
  const double theta_norm = reference ? reference->theta_star.norm() : 0.0;

  FactorEstimate est{b_in, w_in};
  std::vector<IterationDiagnostics> trace;
  trace.reserve(iterations);
  for (std::size_t l = 1; l <= iterations; ++l) {
    const Matrix gw = grad_w(est, batches);
    if (!gw.allFinite()) throw DivergenceError(l, "altgd_baseline: non-finite W gradient");
    est.w -= rate * gw;
    IterationDiagnostics diag;
    diag.iteration = l;
    diag.cost = cost(est, batches);
    if (reference) diag.err_theta = (est.theta() - reference->theta_star).norm() / theta_norm;

    const Matrix gb = grad_b(est, batches);
    if (!gb.allFinite()) throw DivergenceError(l, "altgd_baseline: non-finite B gradient");
    QrResult qr = qr_decompose(est.b.matrix() - rate * gb);
    est.w = qr.r * est.w;
    est.b = std::move(qr.q);
    if (!est.w.allFinite()) throw DivergenceError(l, "altgd_baseline: non-finite W");
    if (reference) diag.subspace_error = subspace_error(est.b, reference->b_star);
    trace.push_back(diag);
  }
  return EpochResult{std::move(est), std::move(trace)};
}

}  // namespace lrrl
