#pragma once

// The online multi-task loop: epoch grids, greedy play against the current
// low-rank estimate, per-epoch re-estimation and pseudo-regret bookkeeping,
// plus an independent per-task linear Thompson Sampling baseline.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrrl/environment.hpp"
#include "lrrl/errors.hpp"
#include "lrrl/estimators.hpp"
#include "lrrl/linalg.hpp"
#include "lrrl/rng.hpp"

namespace lrrl {

enum class ScheduleMode { doubling, uniform };

struct EpochSchedule {
  std::vector<std::size_t> grid;  // G_0 = 0 < G_1 < … < G_M = N
  ScheduleMode mode = ScheduleMode::uniform;

  std::size_t epochs() const { return grid.empty() ? 0 : grid.size() - 1; }
  std::size_t horizon() const { return grid.empty() ? 0 : grid.back(); }
  std::size_t length(std::size_t m) const { return grid.at(m) - grid.at(m - 1); }
};

/// Doubling: M = ⌈log₂log₂N⌉, G_m = round(N^{1−2^{−m}}) for 1 ≤ m < M, G_M = N,
/// duplicates dropped. Uniform: `uniform_epochs` equal epochs with the
/// remainder added to the last one.
inline EpochSchedule epoch_schedule(std::size_t n, ScheduleMode mode,
                                    std::optional<std::size_t> uniform_epochs = std::nullopt) {
  EpochSchedule s;
  s.mode = mode;
  s.grid.push_back(0);
  if (mode == ScheduleMode::doubling) {
    if (n < 4) throw ParameterError("epoch_schedule: doubling mode needs N >= 4");
    const auto nd = static_cast<double>(n);
    const auto m_total = static_cast<std::size_t>(std::ceil(std::log2(std::log2(nd))));
    for (std::size_t m = 1; m < m_total; ++m) {
      const double g = std::round(std::pow(nd, 1.0 - std::ldexp(1.0, -static_cast<int>(m))));
      const auto gi = static_cast<std::size_t>(g);
      if (gi > s.grid.back() && gi < n) s.grid.push_back(gi);
    }
    s.grid.push_back(n);
    return s;
  }
  const std::size_t e = uniform_epochs.value_or(4);
  if (e == 0) throw ParameterError("epoch_schedule: uniform mode needs at least one epoch");
  if (n < e) throw ParameterError("epoch_schedule: N must be >= number of uniform epochs");
  const std::size_t len = n / e;
  for (std::size_t m = 1; m < e; ++m) s.grid.push_back(m * len);
  s.grid.push_back(n);
  return s;
}

/// argmax_k φ_kᵀθ̂, lowest index on ties.
inline Index greedy_action(const ArmSet& arms, const Vector& theta_hat) {
  if (arms.count() < 1) throw ParameterError("greedy_action: empty arm set");
  if (arms.dimension() != theta_hat.size()) throw ParameterError("greedy_action: dimension mismatch");
  const Vector scores = arms.features.transpose() * theta_hat;
  Index best = 0;
  for (Index k = 1; k < scores.size(); ++k)
    if (scores(k) > scores(best)) best = k;
  return best;
}

struct RoundLog {
  std::size_t round = 0;  // 1-based n
  std::size_t task = 0;
  Vector features;
  double observed_reward = 0.0;
  double best_expected = 0.0;
  double chosen_expected = 0.0;
};

struct ExperimentTrace {
  /// Entry n−1 is the pseudo-regret summed over tasks through round n.
  std::vector<double> cumulative_regret;
  /// Err-Θ after each estimation step; index 0 is the initializer, index m is
  /// the end of epoch m. Empty when the world has no planted Θ*.
  std::vector<double> err_theta;
  std::vector<double> subspace_error;
  /// Per-epoch GD iteration diagnostics (epochs without iterations are empty).
  std::vector<std::vector<IterationDiagnostics>> iterations;
  std::vector<double> epoch_seconds;
  std::vector<RoundLog> rounds;  // filled only when requested
  std::vector<std::string> warnings;

  void record_round(double gap_sum) {
    const double prev = cumulative_regret.empty() ? 0.0 : cumulative_regret.back();
    cumulative_regret.push_back(prev + gap_sum);
  }
};

inline double regret_of(const ExperimentTrace& trace) {
  return trace.cumulative_regret.empty() ? 0.0 : trace.cumulative_regret.back();
}

inline double per_task_regret(const ExperimentTrace& trace, std::size_t tasks) {
  if (tasks == 0) throw ParameterError("per_task_regret: T must be positive");
  return regret_of(trace) / static_cast<double>(tasks);
}

enum class Estimator { altgdmin, altgd, mom };

struct LrrlOptions {
  Estimator estimator = Estimator::altgdmin;
  bool record_rounds = false;
  /// Replaces every post-epoch estimate with this d×T matrix (oracle policy).
  std::optional<Matrix> injected_theta;
};

namespace detail {

/// Per-task streams shared by every policy in a trial, so that arm and noise
/// sequences are common random numbers across algorithms.
struct TaskStreams {
  std::vector<Rng> arms;
  std::vector<Rng> noise;
  std::vector<Rng> policy;

  TaskStreams(const Rng& trial, std::size_t tasks) {
    const Rng a = trial.child(StreamPurpose::arms);
    const Rng n = trial.child(StreamPurpose::noise);
    const Rng p = trial.child(StreamPurpose::policy);
    for (std::size_t t = 0; t < tasks; ++t) {
      arms.push_back(a.child(t));
      noise.push_back(n.child(t));
      policy.push_back(p.child(t));
    }
  }
};

inline Batches empty_batches(std::size_t tasks, std::size_t rows, std::size_t d) {
  Batches b(tasks);
  for (std::size_t t = 0; t < tasks; ++t) {
    b[t].task_id = t;
    b[t].phi.resize(static_cast<Index>(rows), static_cast<Index>(d));
    b[t].y.resize(static_cast<Index>(rows));
  }
  return b;
}

inline void record_estimate_metrics(ExperimentTrace& trace, const GroundTruth* truth,
                                    const std::optional<FactorEstimate>& est) {
  if (!truth) return;
  if (!est) {
    trace.err_theta.push_back(1.0);  // Θ̂ = 0
    trace.subspace_error.push_back(std::sqrt(static_cast<double>(truth->b_star.cols())));
    return;
  }
  trace.err_theta.push_back(relative_error(est->theta(), truth->theta_star));
  trace.subspace_error.push_back(subspace_error(est->b, truth->b_star));
}

}  // namespace detail

/// Multi-task greedy bandit with epoch-wise low-rank re-estimation.
///
/// Epoch 1 plays uniformly at random (the estimate is still zero), then runs
/// spectral initialization and the configured estimator on that epoch's data.
/// Later epochs play greedily against the previous estimate and re-estimate
/// from their own data only, warm-started from the previous basis. MoM
/// estimates once, after epoch 1. An estimation failure keeps the previous
/// estimate and adds a warning.
inline ExperimentTrace run_lrrl(const ProblemConfig& cfg, const GdConfig& gd,
                                const EpochSchedule& schedule, const BanditEnvironment& env,
                                const Rng& trial_rng, const LrrlOptions& opts = {}) {
  cfg.validate();
  gd.validate();
  const std::size_t tasks = env.task_count();
  const std::size_t d = env.dimension();
  if (schedule.epochs() < 1) throw ParameterError("run_lrrl: empty schedule");
  if (opts.injected_theta &&
      (opts.injected_theta->rows() != static_cast<Index>(d) ||
       opts.injected_theta->cols() != static_cast<Index>(tasks)))
    throw ParameterError("run_lrrl: injected theta has wrong shape");
  if (cfg.rank > std::min(d, tasks)) throw ParameterError("run_lrrl: r exceeds min(d, T)");

  detail::TaskStreams streams(trial_rng, tasks);
  Rng svd_rng = trial_rng.child(StreamPurpose::svd);
  const GroundTruth* truth = env.truth();

  ExperimentTrace trace;
  trace.cumulative_regret.reserve(schedule.horizon());
  std::optional<FactorEstimate> estimate;
  Matrix theta_hat = Matrix::Zero(static_cast<Index>(d), static_cast<Index>(tasks));

  for (std::size_t m = 1; m <= schedule.epochs(); ++m) {
    const auto started = std::chrono::steady_clock::now();
    const std::size_t len = schedule.length(m);
    Batches batches = detail::empty_batches(tasks, len, d);

    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t round = schedule.grid[m - 1] + i + 1;
      double gap_sum = 0.0;
      for (std::size_t t = 0; t < tasks; ++t) {
        RoundDraw draw = env.draw(t, streams.arms[t]);
        const Index choice =
            m == 1 ? static_cast<Index>(streams.policy[t].uniform_index(static_cast<std::uint64_t>(draw.arms.count())))
                   : greedy_action(draw.arms, theta_hat.col(static_cast<Index>(t)));
        const double y = env.observe(draw, choice, streams.noise[t]);
        const double best = draw.expected.maxCoeff();
        gap_sum += best - draw.expected(choice);
        batches[t].phi.row(static_cast<Index>(i)) = draw.arms.arm(choice).transpose();
        batches[t].y(static_cast<Index>(i)) = y;
        if (opts.record_rounds)
          trace.rounds.push_back(RoundLog{round, t, draw.arms.arm(choice), y, best, draw.expected(choice)});
      }
      trace.record_round(gap_sum);
    }

    std::vector<IterationDiagnostics> iters;
    try {
      if (m == 1) {
        if (opts.estimator == Estimator::mom) {
          MomResult mom = mom_estimate(batches, cfg.rank, gd.svd_iterations, svd_rng);
          if (mom.gap_warning) trace.warnings.push_back("epoch 1: MoM moment matrix has no spectral gap");
          detail::record_estimate_metrics(trace, truth, mom.estimate);  // initializer slot
          detail::record_estimate_metrics(trace, truth, mom.estimate);
          estimate = std::move(mom.estimate);
        } else {
          const bool split = gd.sample_split && opts.estimator == Estimator::altgdmin;
          SplitBatches parts;
          double alpha = 0.0;
          const Batches* init_data = &batches;
          if (split) {
            parts = sample_split(batches, 2 * gd.iterations, true);
            alpha = truncation_threshold(detail::concat_parts(parts.gd_parts), gd.trunc_multiplier);
            init_data = &*parts.init_part;
          } else {
            parts.gd_parts.push_back(batches);
            alpha = truncation_threshold(batches, gd.trunc_multiplier);
          }
          SpectralInit init = spectral_init(*init_data, alpha, cfg.rank, gd.svd_iterations, svd_rng);
          if (init.gap_warning) trace.warnings.push_back("epoch 1: spectral init has no spectral gap");
          const double sigma_hat = gd.sigma_max.value_or(spectral_norm(init.theta0));
          if (truth) {
            const FactorEstimate start{init.basis, min_w(init.basis, batches)};
            detail::record_estimate_metrics(trace, truth, start);
          }
          if (opts.estimator == Estimator::altgdmin) {
            EpochResult r = altgdmin_epoch(init.basis, parts, gd, sigma_hat, truth);
            iters = std::move(r.iterations);
            estimate = std::move(r.estimate);
          } else {
            const Matrix w0 = init.basis.matrix().transpose() * init.theta0;
            EpochResult r = altgd_baseline(init.basis, w0, batches, gd.c_gamma / (sigma_hat * sigma_hat),
                                           gd.iterations, truth);
            iters = std::move(r.iterations);
            estimate = std::move(r.estimate);
          }
          detail::record_estimate_metrics(trace, truth, estimate);
        }
      } else if (opts.estimator == Estimator::mom || !estimate) {
        detail::record_estimate_metrics(trace, truth, estimate);
      } else {
        const double sigma_hat = gd.sigma_max.value_or(spectral_norm(estimate->theta()));
        if (opts.estimator == Estimator::altgdmin) {
          SplitBatches parts;
          if (gd.sample_split)
            parts = sample_split(batches, 2 * gd.iterations, false);
          else
            parts.gd_parts.push_back(batches);
          EpochResult r = altgdmin_epoch(estimate->b, parts, gd, sigma_hat, truth);
          iters = std::move(r.iterations);
          estimate = std::move(r.estimate);
        } else {
          EpochResult r = altgd_baseline(estimate->b, estimate->w, batches,
                                         gd.c_gamma / (sigma_hat * sigma_hat), gd.iterations, truth);
          iters = std::move(r.iterations);
          estimate = std::move(r.estimate);
        }
        detail::record_estimate_metrics(trace, truth, estimate);
      }
    } catch (const Error& e) {
      trace.warnings.push_back("epoch " + std::to_string(m) + ": estimation failed, keeping previous estimate: " +
                               e.what());
      if (m == 1 && truth && trace.err_theta.empty()) detail::record_estimate_metrics(trace, truth, std::nullopt);
      detail::record_estimate_metrics(trace, truth, estimate);
      iters.clear();
    }
    trace.iterations.push_back(std::move(iters));

    if (opts.injected_theta)
      theta_hat = *opts.injected_theta;
    else if (estimate)
      theta_hat = estimate->theta();
    trace.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  }
  return trace;
}

/// Bayesian linear regression posterior for one task, kept as a Cholesky
/// factor of the precision A = λI + ΣφφᵀΣ and the moment vector b = Σ yφ.
class LinearThompsonPosterior {
 public:
  LinearThompsonPosterior(std::size_t d, double ridge, double prior_variance)
      : precision_(Matrix::Identity(static_cast<Index>(d), static_cast<Index>(d)) * ridge),
        moment_(Vector::Zero(static_cast<Index>(d))),
        prior_variance_(prior_variance) {
    if (!(ridge > 0.0)) throw ParameterError("thompson: ridge must be positive");
    if (!(prior_variance > 0.0)) throw ParameterError("thompson: prior_variance must be positive");
  }

  void update(const Vector& phi, double y) {
    precision_.rankUpdate(phi, 1.0);
    if (precision_.info() != Eigen::Success)
      throw NumericalError("thompson: precision lost positive definiteness");
    moment_ += y * phi;
  }

  Vector mean() const { return precision_.solve(moment_); }

  /// θ̃ = mean + √v · L⁻ᵀ z with A = LLᵀ, z ~ N(0, I), so Cov(θ̃) = v A⁻¹.
  Vector sample(Rng& rng) const {
    const Vector z = rng.gaussian_vector(moment_.size());
    const Vector offset = precision_.matrixU().solve(z);
    return mean() + std::sqrt(prior_variance_) * offset;
  }

 private:
  Eigen::LLT<Matrix> precision_;
  Vector moment_;
  double prior_variance_;
};

/// Independent linear Thompson Sampling per task.
inline ExperimentTrace run_thompson(const ProblemConfig& cfg, const BanditEnvironment& env,
                                    double prior_variance, double ridge, const Rng& trial_rng,
                                    bool record_rounds = false) {
  cfg.validate();
  const std::size_t tasks = env.task_count();
  const std::size_t d = env.dimension();
  detail::TaskStreams streams(trial_rng, tasks);
  std::vector<LinearThompsonPosterior> posteriors;
  posteriors.reserve(tasks);
  for (std::size_t t = 0; t < tasks; ++t) posteriors.emplace_back(d, ridge, prior_variance);

  ExperimentTrace trace;
  trace.cumulative_regret.reserve(cfg.horizon);
  for (std::size_t n = 1; n <= cfg.horizon; ++n) {
    double gap_sum = 0.0;
    for (std::size_t t = 0; t < tasks; ++t) {
      RoundDraw draw = env.draw(t, streams.arms[t]);
      const Vector theta = posteriors[t].sample(streams.policy[t]);
      const Index choice = greedy_action(draw.arms, theta);
      const double y = env.observe(draw, choice, streams.noise[t]);
      const double best = draw.expected.maxCoeff();
      gap_sum += best - draw.expected(choice);
      const Vector phi = draw.arms.arm(choice);
      posteriors[t].update(phi, y);
      if (record_rounds) trace.rounds.push_back(RoundLog{n, t, phi, y, best, draw.expected(choice)});
    }
    trace.record_round(gap_sum);
  }
  return trace;
}

}  // namespace lrrl
