#pragma once

// Across-trial mean and sample variance, folded in trial order.

#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lrrl/bandit.hpp"
#include "lrrl/harness/config.hpp"

namespace lrrl::harness {

/// Welford accumulator. Variance is the n−1 sample variance, 0 for n ≤ 1.
struct RunningStat {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  double variance() const {
    if (count < 2) return 0.0;
    return std::max(0.0, m2 / static_cast<double>(count - 1));
  }
};

struct SeriesKey {
  Algorithm algorithm = Algorithm::altgdmin;
  std::size_t tasks = 0;
  std::size_t rank = 0;

  auto operator<=>(const SeriesKey&) const = default;
};

struct IterationStats {
  RunningStat subspace_error;
  RunningStat err_theta;
};

struct MetricSeries {
  std::size_t trials = 0;
  std::vector<RunningStat> regret;     // index n−1 for round n
  std::vector<RunningStat> err_theta;  // index m for epoch m (0 = initializer)
  std::map<std::pair<std::size_t, std::size_t>, IterationStats> iterations;  // (epoch, gd_iter)

  void add(const ExperimentTrace& trace) {
    ++trials;
    grow_and_add(regret, trace.cumulative_regret);
    grow_and_add(err_theta, trace.err_theta);
    for (std::size_t e = 0; e < trace.iterations.size(); ++e) {
      for (const auto& it : trace.iterations[e]) {
        if (!it.subspace_error && !it.err_theta) continue;
        IterationStats& cell = iterations[{e + 1, it.iteration}];
        if (it.subspace_error) cell.subspace_error.add(*it.subspace_error);
        if (it.err_theta) cell.err_theta.add(*it.err_theta);
      }
    }
  }

 private:
  static void grow_and_add(std::vector<RunningStat>& stats, const std::vector<double>& xs) {
    if (stats.size() < xs.size()) stats.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) stats[i].add(xs[i]);
  }
};

struct TrialFailure {
  Algorithm algorithm = Algorithm::altgdmin;
  std::size_t tasks = 0;
  std::size_t rank = 0;
  std::size_t trial = 0;
  std::uint64_t stream_seed = 0;
  std::string message;
};

struct AggregateResult {
  std::uint64_t seed = 0;
  std::map<SeriesKey, MetricSeries> series;
  std::vector<TrialFailure> failures;
  std::vector<std::string> warnings;
  std::size_t runs = 0;  // attempted (algorithm, point, trial) runs

  void add(const SeriesKey& key, const ExperimentTrace& trace) {
    ++runs;
    series[key].add(trace);
  }

  void add_failure(TrialFailure f) {
    ++runs;
    failures.push_back(std::move(f));
  }

  double failure_fraction() const {
    return runs == 0 ? 0.0 : static_cast<double>(failures.size()) / static_cast<double>(runs);
  }
};

}  // namespace lrrl::harness
