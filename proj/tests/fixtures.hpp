#pragma once

// Shared test data builders.

#include <cstddef>

#include "lrrl/environment.hpp"
#include "lrrl/estimators.hpp"
#include "lrrl/rng.hpp"

namespace fixtures {

/// n Gaussian-design samples per task from the planted model, noise sd `sd`.
inline lrrl::Batches gaussian_batches(const lrrl::GroundTruth& g, std::size_t n, double sd, lrrl::Rng& rng) {
  lrrl::Batches out(static_cast<std::size_t>(g.theta_star.cols()));
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t].task_id = t;
    out[t].phi = rng.gaussian_matrix(static_cast<lrrl::Index>(n), g.theta_star.rows());
    out[t].y = out[t].phi * g.theta_star.col(static_cast<lrrl::Index>(t));
    for (lrrl::Index i = 0; i < out[t].y.size(); ++i) out[t].y(i) += sd * rng.normal();
  }
  return out;
}

inline lrrl::ProblemConfig problem(std::size_t d, std::size_t tasks, std::size_t r) {
  lrrl::ProblemConfig cfg;
  cfg.dimension = d;
  cfg.tasks = tasks;
  cfg.rank = r;
  return cfg;
}

}  // namespace fixtures
