// lrrl: run, validate and inspect multi-task bandit experiments.
//
// Exit codes: 0 success, 1 config or input error, 2 too many failed runs.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lrrl/bandit.hpp"
#include "lrrl/errors.hpp"
#include "lrrl/harness/config.hpp"
#include "lrrl/harness/experiment.hpp"
#include "lrrl/mnist.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

int cmd_run(const std::string& path) {
  using namespace lrrl::harness;
  const ExperimentConfig cfg = load_config(path);
  RunOptions opts = RunOptions::from_environment();
  opts.log = &std::cerr;
  std::cerr << "running " << cfg.sweep_points().size() << " sweep point(s) x " << cfg.trials << " trial(s) on "
            << opts.workers << " worker(s)\n";
  const AggregateResult result = run_experiment(cfg, opts);
  const auto dir = opts.output_dir.value_or(cfg.output_dir);
  std::cout << "wrote results to " << dir.string() << "\n";
  for (const auto& [key, s] : result.series) {
    if (s.regret.empty()) continue;
    std::printf("%-14s T=%-4zu r=%-3zu trials=%-4zu final cum. regret %.4g (var %.3g)\n",
                algorithm_name(key.algorithm), key.tasks, key.rank, s.trials, s.regret.back().mean,
                s.regret.back().variance());
  }
  return kExitOk;
}

int cmd_validate(const std::string& path) {
  const auto cfg = lrrl::harness::load_config(path);
  std::cout << lrrl::harness::serialize_config(cfg);
  return kExitOk;
}

int cmd_schedule(std::size_t n, const std::string& mode, std::optional<std::size_t> epochs) {
  const auto m = mode == "doubling" ? lrrl::ScheduleMode::doubling : lrrl::ScheduleMode::uniform;
  const auto s = lrrl::epoch_schedule(n, m, epochs);
  std::cout << "[";
  for (std::size_t i = 0; i < s.grid.size(); ++i) std::cout << (i ? "," : "") << s.grid[i];
  std::cout << "]\n";
  return kExitOk;
}

int cmd_mnist_check(const std::string& images, const std::string& labels) {
  const auto world = lrrl::load_mnist_idx(images, labels);
  std::cout << "images: " << world.total_images() << " (28x28)\n";
  for (int d = 0; d < 10; ++d) std::cout << "digit " << d << ": " << world.pool_size(d) << "\n";
  std::size_t usable = 0;
  for (const auto& [a, b] : world.task_pairs())
    if (world.pool_size(a) > 0 && world.pool_size(b) > 0) ++usable;
  std::cout << "tasks with both pools non-empty: " << usable << " of " << world.task_pairs().size() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task low-rank linear bandit experiments"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment config and write CSVs");
  run->add_option("config", config_path, "JSON config file")->required();

  auto* validate = app.add_subcommand("validate", "Check a config and print it with defaults filled in");
  validate->add_option("config", config_path, "JSON config file")->required();

  std::size_t n = 0;
  std::string mode = "doubling";
  std::optional<std::size_t> epochs;
  auto* schedule = app.add_subcommand("schedule", "Print the epoch grid for a horizon");
  schedule->add_option("--n", n, "Rounds per task")->required();
  schedule->add_option("--mode", mode, "doubling or uniform")->check(CLI::IsMember({"doubling", "uniform"}));
  schedule->add_option("--epochs", epochs, "Epoch count for uniform mode");

  std::string images, labels;
  auto* mnist = app.add_subcommand("mnist-check", "Parse IDX files and summarize the digit pools");
  mnist->add_option("images", images, "IDX image file")->required();
  mnist->add_option("labels", labels, "IDX label file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path);
    if (*validate) return cmd_validate(config_path);
    if (*schedule) return cmd_schedule(n, mode, epochs);
    if (*mnist) return cmd_mnist_check(images, labels);
  } catch (const lrrl::harness::FailureThresholdError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const lrrl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
