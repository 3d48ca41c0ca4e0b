#include "glms/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "glms/rng.hpp"

namespace glms {

PlantedInstance make_planted(ProblemKind kind, const SynthConfig& cfg, std::uint64_t seed) {
  if (cfg.m < 1 || cfg.n < 1) throw std::invalid_argument("make_planted: bad dimensions");
  Rng rng(splitmix64(seed ^ 0x452821e638d01377ULL));

  Eigen::MatrixXd a(cfg.m, cfg.n);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = rng.normal();
  RowMatrix rm = RowMatrix::from_dense(a);

  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.n));

  if (kind == ProblemKind::multiple) {
    Eigen::MatrixXd xt(cfg.n, cfg.response_cols);
    for (Eigen::Index j = 0; j < xt.rows(); ++j)
      for (Eigen::Index k = 0; k < xt.cols(); ++k) xt(j, k) = scale * rng.normal();
    Eigen::MatrixXd b = a * xt;
    for (Eigen::Index i = 0; i < b.rows(); ++i)
      for (Eigen::Index k = 0; k < b.cols(); ++k) b(i, k) += cfg.noise_sigma * rng.normal();
    Eigen::VectorXd xv(cfg.n * cfg.response_cols);
    for (Eigen::Index k = 0; k < xt.cols(); ++k) xv.segment(k * cfg.n, cfg.n) = xt.col(k);
    return {RegressionProblem::multiple(std::move(rm), std::move(b)), std::move(xv)};
  }

  Eigen::VectorXd xt(cfg.n);
  for (Eigen::Index j = 0; j < xt.size(); ++j) xt[j] = scale * rng.normal();
  Eigen::VectorXd b = a * xt;
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    double sigma = cfg.noise_sigma;
    if (cfg.outlier_fraction > 0.0 && rng.uniform() < cfg.outlier_fraction) sigma *= 100.0;
    b[i] += sigma * rng.normal();
  }

  switch (kind) {
    case ProblemKind::linear:
      return {RegressionProblem::linear(std::move(rm), std::move(b)), std::move(xt)};
    case ProblemKind::ridge:
      return {RegressionProblem::ridge(std::move(rm), std::move(b), cfg.lambda),
              std::move(xt)};
    case ProblemKind::lasso:
      return {RegressionProblem::lasso(std::move(rm), std::move(b), cfg.lambda),
              std::move(xt)};
    case ProblemKind::ell_p:
      return {RegressionProblem::ell_p(std::move(rm), std::move(b), cfg.p), std::move(xt)};
    case ProblemKind::gamma_p:
      return {RegressionProblem::gamma_p(std::move(rm), std::move(b), cfg.p), std::move(xt)};
    case ProblemKind::multiple: break;  // handled above
  }
  throw std::invalid_argument("make_planted: unknown kind");
}

}  // namespace glms
