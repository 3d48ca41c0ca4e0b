#pragma once

// Seeded synthetic regression instances: Gaussian design, planted solution,
// additive noise, optional heavy-tailed outlier rows for the robust losses.

#include <cstdint>

#include <Eigen/Dense>

#include "glms/regressors.hpp"

namespace glms {

struct SynthConfig {
  std::int64_t m = 1000;
  std::int64_t n = 10;
  double noise_sigma = 0.1;
  double outlier_fraction = 0.0;  // rows whose noise is multiplied by 100
  double lambda = 1.0;            // ridge / lasso
  double p = 1.0;                 // ell_p / gamma_p
  std::int64_t response_cols = 3;  // multiple
};

struct PlantedInstance {
  RegressionProblem problem;
  Eigen::VectorXd x_true;  // free_dim entries (vec form for multiple)
};

PlantedInstance make_planted(ProblemKind kind, const SynthConfig& cfg, std::uint64_t seed);

}  // namespace glms
