#pragma once

// Experiment configuration: a JSON document with a fixed schema. Every
// section is optional and defaulted; unknown keys are rejected.
//
//   {
//     "problem":  {"d": 20, "T": 30, "r": 2, "K": 5, "N": 40,
//                  "noise_variance": 1e-6, "seed": 0, "arm_mean": [..]},
//     "gd":       {"L": 200, "c_gamma": 0.4, "trunc_multiplier": 9,
//                  "sample_split": false, "sigma_max": null, "svd_iterations": 100},
//     "schedule": {"mode": "uniform" | "doubling", "epochs": 4},
//     "algorithms": ["lrrl-altgdmin", "lrrl-altgd", "mom", "thompson"],
//     "thompson": {"prior_variance": 1, "ridge": 1},
//     "trials": 100,
//     "output_dir": "results",
//     "dataset":  {"kind": "synthetic"} | {"kind": "mnist", "images": p, "labels": p},
//     "sweep":    {"T": [10, 25], "r": [2, 4]}
//   }

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrrl/bandit.hpp"
#include "lrrl/environment.hpp"
#include "lrrl/errors.hpp"
#include "lrrl/estimators.hpp"
#include "lrrl/mnist.hpp"

namespace lrrl::harness {

using json = nlohmann::ordered_json;

enum class Algorithm { altgdmin, altgd, mom, thompson };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::altgdmin: return "lrrl-altgdmin";
    case Algorithm::altgd: return "lrrl-altgd";
    case Algorithm::mom: return "mom";
    case Algorithm::thompson: return "thompson";
  }
  return "?";
}

inline std::optional<Algorithm> parse_algorithm(const std::string& s) {
  for (auto a : {Algorithm::altgdmin, Algorithm::altgd, Algorithm::mom, Algorithm::thompson})
    if (s == algorithm_name(a)) return a;
  return std::nullopt;
}

struct ScheduleConfig {
  ScheduleMode mode = ScheduleMode::uniform;
  std::size_t epochs = 4;

  bool operator==(const ScheduleConfig&) const = default;
};

struct ThompsonConfig {
  double prior_variance = 1.0;
  double ridge = 1.0;

  bool operator==(const ThompsonConfig&) const = default;
};

struct DatasetConfig {
  enum class Kind { synthetic, mnist } kind = Kind::synthetic;
  std::string images;
  std::string labels;

  bool operator==(const DatasetConfig&) const = default;
};

struct SweepConfig {
  std::vector<std::size_t> tasks;  // empty: problem.T only
  std::vector<std::size_t> ranks;  // empty: problem.r only

  bool operator==(const SweepConfig&) const = default;
};

inline constexpr std::size_t kDefaultTrials = 100;
inline constexpr std::size_t kDefaultMnistTrials = 20;

struct ExperimentConfig {
  ProblemConfig problem;
  GdConfig gd;
  ScheduleConfig schedule;
  std::vector<Algorithm> algorithms{Algorithm::altgdmin, Algorithm::altgd, Algorithm::mom,
                                    Algorithm::thompson};
  ThompsonConfig thompson;
  std::size_t trials = kDefaultTrials;
  std::string output_dir = "results";
  DatasetConfig dataset;
  std::optional<SweepConfig> sweep;

  ExperimentConfig() { gd.sample_split = false; }

  /// (T, r) grid, T-major.
  std::vector<std::pair<std::size_t, std::size_t>> sweep_points() const {
    std::vector<std::size_t> ts{problem.tasks}, rs{problem.rank};
    if (sweep && !sweep->tasks.empty()) ts = sweep->tasks;
    if (sweep && !sweep->ranks.empty()) rs = sweep->ranks;
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (auto t : ts)
      for (auto r : rs) out.emplace_back(t, r);
    return out;
  }

  ProblemConfig problem_at(std::size_t tasks, std::size_t rank) const {
    ProblemConfig p = problem;
    p.tasks = tasks;
    p.rank = rank;
    return p;
  }
};

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.problem == b.problem && a.gd == b.gd && a.schedule == b.schedule &&
         a.algorithms == b.algorithms && a.thompson == b.thompson && a.trials == b.trials &&
         a.output_dir == b.output_dir && a.dataset == b.dataset && a.sweep == b.sweep;
}

namespace detail {

inline void reject_unknown(const json& obj, const std::string& section,
                           std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("config: '" + section + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; }))
      throw ConfigError("config: unknown key '" + (section.empty() ? key : section + "." + key) + "'");
  }
}

template <typename T>
T get_field(const json& obj, const char* key, const std::string& path, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: field '" + path + "' has the wrong type");
  }
}

inline std::size_t get_count(const json& obj, const char* key, const std::string& path,
                             std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw ConfigError("config: field '" + path + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

inline std::vector<std::size_t> get_count_list(const json& obj, const char* key, const std::string& path) {
  const auto& v = obj.at(key);
  if (!v.is_array() || v.empty()) throw ConfigError("config: field '" + path + "' must be a non-empty list");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_integer() || e.get<std::int64_t>() <= 0)
      throw ConfigError("config: field '" + path + "' must hold positive integers");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

/// 1-based line/column of a byte offset into `text`.
inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

/// Rejects configs whose fields are individually well-typed but inconsistent.
inline void validate(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("config: invalid '" + field + "': " + why);
  };
  if (cfg.trials < 1) fail("trials", "must be >= 1");
  if (cfg.algorithms.empty()) fail("algorithms", "must be non-empty");
  if (!(cfg.gd.c_gamma > 0.0 && cfg.gd.c_gamma <= 0.5)) fail("gd.c_gamma", "must lie in (0, 0.5]");
  if (cfg.gd.iterations < 1) fail("gd.L", "must be >= 1");
  if (!(cfg.gd.trunc_multiplier > 0.0)) fail("gd.trunc_multiplier", "must be positive");
  if (cfg.gd.sigma_max && !(*cfg.gd.sigma_max > 0.0)) fail("gd.sigma_max", "must be positive");
  if (cfg.gd.svd_iterations < 1) fail("gd.svd_iterations", "must be >= 1");
  if (!(cfg.thompson.prior_variance > 0.0)) fail("thompson.prior_variance", "must be positive");
  if (!(cfg.thompson.ridge > 0.0)) fail("thompson.ridge", "must be positive");
  if (cfg.output_dir.empty()) fail("output_dir", "must be non-empty");
  if (cfg.dataset.kind == DatasetConfig::Kind::mnist) {
    if (cfg.dataset.images.empty()) fail("dataset.images", "required for mnist");
    if (cfg.dataset.labels.empty()) fail("dataset.labels", "required for mnist");
    if (cfg.problem.dimension != kMnistPixels) fail("problem.d", "must be 784 for mnist");
    if (cfg.problem.arms != 2) fail("problem.K", "must be 2 for mnist");
  }
  for (const auto& [t, r] : cfg.sweep_points()) {
    const ProblemConfig p = cfg.problem_at(t, r);
    if (p.tasks == 0) fail("problem.T", "must be positive");
    if (p.rank == 0 || p.rank > std::min(p.dimension, p.tasks))
      fail("problem.r", "r = " + std::to_string(p.rank) + " exceeds min(d, T) = " +
                            std::to_string(std::min(p.dimension, p.tasks)));
    if (cfg.dataset.kind == DatasetConfig::Kind::mnist && p.tasks > 45)
      fail("problem.T", "mnist has at most 45 digit-pair tasks");
    try {
      p.validate();
    } catch (const ParameterError& e) {
      fail("problem", e.what());
    }
  }
  EpochSchedule schedule;
  try {
    schedule = cfg.schedule.mode == ScheduleMode::doubling
                   ? epoch_schedule(cfg.problem.horizon, ScheduleMode::doubling)
                   : epoch_schedule(cfg.problem.horizon, ScheduleMode::uniform, cfg.schedule.epochs);
  } catch (const ParameterError& e) {
    fail("schedule", e.what());
  }
  if (cfg.gd.sample_split) {
    for (std::size_t m = 1; m <= schedule.epochs(); ++m) {
      const std::size_t need = 2 * cfg.gd.iterations + (m == 1 ? 1 : 0);
      if (schedule.length(m) < need)
        fail("gd.sample_split", "epoch " + std::to_string(m) + " has " + std::to_string(schedule.length(m)) +
                                    " rounds but splitting needs " + std::to_string(need));
    }
  }
}

inline ExperimentConfig config_from_json(const json& root) {
  using detail::get_count;
  using detail::get_field;
  detail::reject_unknown(root, "", {"problem", "gd", "schedule", "algorithms", "thompson", "trials",
                                    "output_dir", "dataset", "sweep"});
  ExperimentConfig cfg;

  if (root.contains("dataset")) {
    const auto& ds = root.at("dataset");
    detail::reject_unknown(ds, "dataset", {"kind", "images", "labels"});
    const auto kind = get_field<std::string>(ds, "kind", "dataset.kind", "synthetic");
    if (kind == "synthetic") {
      cfg.dataset.kind = DatasetConfig::Kind::synthetic;
    } else if (kind == "mnist") {
      cfg.dataset.kind = DatasetConfig::Kind::mnist;
      cfg.problem.dimension = kMnistPixels;
      cfg.problem.arms = 2;
      cfg.problem.tasks = 45;
      cfg.problem.horizon = 5000;
      cfg.schedule.epochs = 5;
      cfg.trials = kDefaultMnistTrials;
    } else {
      throw ConfigError("config: invalid 'dataset.kind': expected synthetic or mnist");
    }
    cfg.dataset.images = get_field<std::string>(ds, "images", "dataset.images", "");
    cfg.dataset.labels = get_field<std::string>(ds, "labels", "dataset.labels", "");
  }

  if (root.contains("problem")) {
    const auto& p = root.at("problem");
    detail::reject_unknown(p, "problem", {"d", "T", "r", "K", "N", "noise_variance", "seed", "arm_mean"});
    cfg.problem.dimension = get_count(p, "d", "problem.d", cfg.problem.dimension);
    cfg.problem.tasks = get_count(p, "T", "problem.T", cfg.problem.tasks);
    cfg.problem.rank = get_count(p, "r", "problem.r", cfg.problem.rank);
    cfg.problem.arms = get_count(p, "K", "problem.K", cfg.problem.arms);
    cfg.problem.horizon = get_count(p, "N", "problem.N", cfg.problem.horizon);
    cfg.problem.noise_variance = get_field<double>(p, "noise_variance", "problem.noise_variance",
                                                   cfg.problem.noise_variance);
    cfg.problem.seed = get_field<std::uint64_t>(p, "seed", "problem.seed", cfg.problem.seed);
    if (p.contains("arm_mean")) {
      const auto mean = get_field<std::vector<double>>(p, "arm_mean", "problem.arm_mean", {});
      cfg.problem.arm_mean = Eigen::Map<const Vector>(mean.data(), static_cast<Index>(mean.size()));
    }
  }

  if (root.contains("gd")) {
    const auto& g = root.at("gd");
    detail::reject_unknown(g, "gd", {"L", "c_gamma", "trunc_multiplier", "sample_split", "sigma_max",
                                     "svd_iterations"});
    cfg.gd.iterations = get_count(g, "L", "gd.L", cfg.gd.iterations);
    cfg.gd.c_gamma = get_field<double>(g, "c_gamma", "gd.c_gamma", cfg.gd.c_gamma);
    cfg.gd.trunc_multiplier = get_field<double>(g, "trunc_multiplier", "gd.trunc_multiplier",
                                                cfg.gd.trunc_multiplier);
    cfg.gd.sample_split = get_field<bool>(g, "sample_split", "gd.sample_split", cfg.gd.sample_split);
    if (g.contains("sigma_max") && !g.at("sigma_max").is_null())
      cfg.gd.sigma_max = get_field<double>(g, "sigma_max", "gd.sigma_max", 0.0);
    cfg.gd.svd_iterations = get_count(g, "svd_iterations", "gd.svd_iterations", cfg.gd.svd_iterations);
  }

  if (root.contains("schedule")) {
    const auto& s = root.at("schedule");
    detail::reject_unknown(s, "schedule", {"mode", "epochs"});
    const auto mode = get_field<std::string>(s, "mode", "schedule.mode", "uniform");
    if (mode == "uniform")
      cfg.schedule.mode = ScheduleMode::uniform;
    else if (mode == "doubling")
      cfg.schedule.mode = ScheduleMode::doubling;
    else
      throw ConfigError("config: invalid 'schedule.mode': expected uniform or doubling");
    cfg.schedule.epochs = get_count(s, "epochs", "schedule.epochs", cfg.schedule.epochs);
  }

  if (root.contains("algorithms")) {
    const auto names = get_field<std::vector<std::string>>(root, "algorithms", "algorithms", {});
    cfg.algorithms.clear();
    for (const auto& n : names) {
      const auto a = parse_algorithm(n);
      if (!a) throw ConfigError("config: invalid 'algorithms': unknown algorithm '" + n + "'");
      if (std::find(cfg.algorithms.begin(), cfg.algorithms.end(), *a) != cfg.algorithms.end())
        throw ConfigError("config: invalid 'algorithms': duplicate '" + n + "'");
      cfg.algorithms.push_back(*a);
    }
  }

  if (root.contains("thompson")) {
    const auto& t = root.at("thompson");
    detail::reject_unknown(t, "thompson", {"prior_variance", "ridge"});
    cfg.thompson.prior_variance =
        get_field<double>(t, "prior_variance", "thompson.prior_variance", cfg.thompson.prior_variance);
    cfg.thompson.ridge = get_field<double>(t, "ridge", "thompson.ridge", cfg.thompson.ridge);
  }

  cfg.trials = get_count(root, "trials", "trials", cfg.trials);
  cfg.output_dir = get_field<std::string>(root, "output_dir", "output_dir", cfg.output_dir);

  if (root.contains("sweep")) {
    const auto& s = root.at("sweep");
    detail::reject_unknown(s, "sweep", {"T", "r"});
    SweepConfig sw;
    if (s.contains("T")) sw.tasks = detail::get_count_list(s, "T", "sweep.T");
    if (s.contains("r")) sw.ranks = detail::get_count_list(s, "r", "sweep.r");
    if (sw.tasks.empty() && sw.ranks.empty())
      throw ConfigError("config: invalid 'sweep': needs a T or r list");
    cfg.sweep = std::move(sw);
  }

  validate(cfg);
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError("config: parse error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
  }
  return config_from_json(root);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

inline json to_json(const ExperimentConfig& cfg) {
  json root;
  json problem{{"d", cfg.problem.dimension}, {"T", cfg.problem.tasks}, {"r", cfg.problem.rank},
               {"K", cfg.problem.arms},      {"N", cfg.problem.horizon},
               {"noise_variance", cfg.problem.noise_variance}, {"seed", cfg.problem.seed}};
  if (cfg.problem.arm_mean.size() != 0)
    problem["arm_mean"] = std::vector<double>(cfg.problem.arm_mean.data(),
                                              cfg.problem.arm_mean.data() + cfg.problem.arm_mean.size());
  root["problem"] = problem;
  json gd{{"L", cfg.gd.iterations},
          {"c_gamma", cfg.gd.c_gamma},
          {"trunc_multiplier", cfg.gd.trunc_multiplier},
          {"sample_split", cfg.gd.sample_split},
          {"sigma_max", cfg.gd.sigma_max ? json(*cfg.gd.sigma_max) : json(nullptr)},
          {"svd_iterations", cfg.gd.svd_iterations}};
  root["gd"] = gd;
  root["schedule"] = {{"mode", cfg.schedule.mode == ScheduleMode::doubling ? "doubling" : "uniform"},
                      {"epochs", cfg.schedule.epochs}};
  json algos = json::array();
  for (auto a : cfg.algorithms) algos.push_back(algorithm_name(a));
  root["algorithms"] = algos;
  root["thompson"] = {{"prior_variance", cfg.thompson.prior_variance}, {"ridge", cfg.thompson.ridge}};
  root["trials"] = cfg.trials;
  root["output_dir"] = cfg.output_dir;
  if (cfg.dataset.kind == DatasetConfig::Kind::mnist)
    root["dataset"] = {{"kind", "mnist"}, {"images", cfg.dataset.images}, {"labels", cfg.dataset.labels}};
  else
    root["dataset"] = {{"kind", "synthetic"}};
  if (cfg.sweep) {
    json sw = json::object();
    if (!cfg.sweep->tasks.empty()) sw["T"] = cfg.sweep->tasks;
    if (!cfg.sweep->ranks.empty()) sw["r"] = cfg.sweep->ranks;
    root["sweep"] = sw;
  }
  return root;
}

inline std::string serialize_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace lrrl::harness
