#pragma once

// Multi-trial driver. Jobs are (sweep point, trial) pairs run on a small
// thread pool; every algorithm in a job shares the trial's streams. Results
// are folded in (point, trial, algorithm) order so the output does not depend
// on scheduling.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "lrrl/bandit.hpp"
#include "lrrl/environment.hpp"
#include "lrrl/errors.hpp"
#include "lrrl/harness/aggregate.hpp"
#include "lrrl/harness/config.hpp"
#include "lrrl/harness/csv.hpp"
#include "lrrl/mnist.hpp"
#include "lrrl/rng.hpp"

namespace lrrl::harness {

inline constexpr double kMaxFailureFraction = 0.10;

/// More than kMaxFailureFraction of the runs threw.
class FailureThresholdError : public Error {
 public:
  using Error::Error;
};

struct RunOptions {
  std::size_t workers = 1;
  std::optional<std::filesystem::path> output_dir;  // overrides cfg.output_dir
  bool write_files = true;
  std::ostream* log = nullptr;

  /// Reads LRRL_WORKERS and LRRL_OUTPUT_DIR.
  static RunOptions from_environment() {
    RunOptions o;
    o.workers = std::max(1u, std::thread::hardware_concurrency());
    if (const char* w = std::getenv("LRRL_WORKERS")) {
      char* end = nullptr;
      const unsigned long v = std::strtoul(w, &end, 10);
      if (end == w || *end != '\0' || v == 0)
        throw ConfigError("LRRL_WORKERS must be a positive integer, got '" + std::string(w) + "'");
      o.workers = v;
    }
    if (const char* dir = std::getenv("LRRL_OUTPUT_DIR"); dir && *dir) o.output_dir = dir;
    return o;
  }
};

/// Stream for one trial at one sweep point. Child i of the master seed, then
/// keyed by (T, r) so adding sweep points leaves the others unchanged.
inline Rng trial_stream(std::uint64_t master_seed, std::size_t trial, std::size_t tasks, std::size_t rank) {
  const std::uint64_t point = (static_cast<std::uint64_t>(tasks) << 32) ^ static_cast<std::uint64_t>(rank);
  return Rng(master_seed).child(trial).child(StreamPurpose::sweep_point).child(point);
}

inline EpochSchedule schedule_of(const ExperimentConfig& cfg) {
  return cfg.schedule.mode == ScheduleMode::doubling
             ? epoch_schedule(cfg.problem.horizon, ScheduleMode::doubling)
             : epoch_schedule(cfg.problem.horizon, ScheduleMode::uniform, cfg.schedule.epochs);
}

/// Runs one algorithm on one environment with the trial's streams.
inline ExperimentTrace run_algorithm(Algorithm algo, const ExperimentConfig& cfg, const ProblemConfig& problem,
                                     const EpochSchedule& schedule, const BanditEnvironment& env,
                                     const Rng& trial) {
  LrrlOptions opts;
  switch (algo) {
    case Algorithm::thompson:
      return run_thompson(problem, env, cfg.thompson.prior_variance, cfg.thompson.ridge, trial);
    case Algorithm::altgdmin:
      opts.estimator = Estimator::altgdmin;
      return run_lrrl(problem, cfg.gd, schedule, env, trial, opts);
    case Algorithm::altgd:
      opts.estimator = Estimator::altgd;
      return run_lrrl(problem, cfg.gd, schedule, env, trial, opts);
    case Algorithm::mom:
      opts.estimator = Estimator::mom;
      return run_lrrl(problem, cfg.gd, schedule, env, trial, opts);
  }
  throw ParameterError("run_algorithm: unknown algorithm");
}

namespace detail {

struct RunFailure {
  std::string message;
};

struct JobOutcome {
  std::vector<std::variant<ExperimentTrace, RunFailure>> runs;  // one per cfg.algorithms entry
};

inline JobOutcome run_job(const ExperimentConfig& cfg, const EpochSchedule& schedule,
                          const std::shared_ptr<const MnistTaskWorld>& world, std::size_t tasks,
                          std::size_t rank, std::size_t trial) {
  JobOutcome out;
  const ProblemConfig problem = cfg.problem_at(tasks, rank);
  const Rng stream = trial_stream(cfg.problem.seed, trial, tasks, rank);
  std::unique_ptr<BanditEnvironment> env;
  try {
    if (world) {
      env = std::make_unique<MnistEnvironment>(world, tasks, problem.noise_variance);
    } else {
      Rng truth_rng = stream.child(StreamPurpose::ground_truth);
      env = std::make_unique<SyntheticEnvironment>(problem, generate_ground_truth(problem, truth_rng));
    }
  } catch (const std::exception& e) {
    for (std::size_t a = 0; a < cfg.algorithms.size(); ++a)
      out.runs.emplace_back(RunFailure{std::string("environment: ") + e.what()});
    return out;
  }
  for (Algorithm algo : cfg.algorithms) {
    try {
      out.runs.emplace_back(run_algorithm(algo, cfg, problem, schedule, *env, stream));
    } catch (const std::exception& e) {
      out.runs.emplace_back(RunFailure{e.what()});
    }
  }
  return out;
}

inline std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r' || c == ',') c = ' ';
  return s;
}

}  // namespace detail

/// Writes failures.csv (algorithm,T,r,trial,stream_seed,message).
inline void write_failures(const AggregateResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("write_failures: cannot open " + path.string());
  out << "# seed=" << result.seed << "\n# git-describe=" LRRL_GIT_DESCRIBE "\n";
  out << "algorithm,T,r,trial,stream_seed,message\n";
  for (const auto& f : result.failures)
    out << algorithm_name(f.algorithm) << ',' << f.tasks << ',' << f.rank << ',' << f.trial << ','
        << f.stream_seed << ',' << detail::one_line(f.message) << '\n';
  if (!out) throw Error("write_failures: write failed for " + path.string());
}

/// Runs every (sweep point, trial, algorithm), aggregates, and writes
/// regret.csv, err_theta.csv and se_iter.csv (the latter two only when the
/// world has a planted Θ*). Throws FailureThresholdError after writing if too
/// many runs failed.
inline AggregateResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  validate(cfg);
  const EpochSchedule schedule = schedule_of(cfg);
  std::shared_ptr<const MnistTaskWorld> world;
  if (cfg.dataset.kind == DatasetConfig::Kind::mnist)
    world = std::make_shared<const MnistTaskWorld>(load_mnist_idx(cfg.dataset.images, cfg.dataset.labels));

  const auto points = cfg.sweep_points();
  const std::size_t jobs = points.size() * cfg.trials;
  std::vector<detail::JobOutcome> outcomes(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next.fetch_add(1); j < jobs; j = next.fetch_add(1)) {
      const auto [tasks, rank] = points[j / cfg.trials];
      outcomes[j] = detail::run_job(cfg, schedule, world, tasks, rank, j % cfg.trials);
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(1, opts.workers), std::max<std::size_t>(1, jobs));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
  }

  AggregateResult result;
  result.seed = cfg.problem.seed;
  for (std::size_t j = 0; j < jobs; ++j) {
    const auto [tasks, rank] = points[j / cfg.trials];
    const std::size_t trial = j % cfg.trials;
    for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
      const SeriesKey key{cfg.algorithms[a], tasks, rank};
      auto& run = outcomes[j].runs[a];
      if (auto* f = std::get_if<detail::RunFailure>(&run)) {
        result.add_failure(TrialFailure{key.algorithm, tasks, rank, trial,
                                        trial_stream(cfg.problem.seed, trial, tasks, rank).seed(), f->message});
        continue;
      }
      const auto& trace = std::get<ExperimentTrace>(run);
      for (const auto& w : trace.warnings)
        result.warnings.push_back(std::string(algorithm_name(key.algorithm)) + " T=" + std::to_string(tasks) +
                                  " r=" + std::to_string(rank) + " trial " + std::to_string(trial) + ": " + w);
      result.add(key, trace);
    }
    outcomes[j] = {};
  }

  if (opts.write_files) {
    const std::filesystem::path dir = opts.output_dir.value_or(std::filesystem::path(cfg.output_dir));
    std::filesystem::create_directories(dir);
    for (CsvKind kind : {CsvKind::regret, CsvKind::err_theta, CsvKind::se_iter}) {
      const auto path = dir / (std::string(csv_kind_name(kind)) + ".csv");
      if (has_rows(result, kind))
        write_csv(result, kind, path);
      else if (opts.log)
        *opts.log << "no " << csv_kind_name(kind) << " data; " << path.string() << " not written\n";
    }
    if (!result.failures.empty()) write_failures(result, dir / "failures.csv");
  }
  if (opts.log) {
    *opts.log << result.runs << " runs, " << result.failures.size() << " failed, " << result.warnings.size()
              << " estimation warnings\n";
  }
  if (result.failure_fraction() > kMaxFailureFraction)
    throw FailureThresholdError(std::to_string(result.failures.size()) + " of " + std::to_string(result.runs) +
                                " runs failed (limit " + std::to_string(static_cast<int>(kMaxFailureFraction * 100)) +
                                "%)");
  return result;
}

}  // namespace lrrl::harness
