#pragma once

// Regression front ends over the sparsifier.
//
// Each problem kind is lowered to a GLM instance F(x') = sum_i f_i(<a'_i, x'>)
// via row embedding: responses ride along as a trailing bias column consumed
// by x' = (x, -1), ridge adds sqrt(lambda) * I rows, lasso adds identity rows
// with absolute loss of scale lambda, and multiple regression vectorizes the
// unknown matrix column-major. Solvers then minimize the sparsified
// objective on the sampled rows only.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glms/losses.hpp"
#include "glms/matrix_io.hpp"
#include "glms/oracles.hpp"
#include "glms/sparsifier.hpp"

namespace glms {

enum class ProblemKind { linear, multiple, ridge, lasso, ell_p, gamma_p };

std::string_view problem_kind_name(ProblemKind k);

struct RegressionProblem {
  ProblemKind kind = ProblemKind::linear;
  RowMatrix a;
  Eigen::VectorXd b;        // responses; unused for multiple
  Eigen::MatrixXd b_multi;  // m x N responses for multiple
  double lambda = 0.0;      // ridge / lasso strength
  double p = 2.0;           // ell_p / gamma_p exponent

  static RegressionProblem linear(RowMatrix a, Eigen::VectorXd b);
  static RegressionProblem multiple(RowMatrix a, Eigen::MatrixXd b);
  static RegressionProblem ridge(RowMatrix a, Eigen::VectorXd b, double lambda);
  static RegressionProblem lasso(RowMatrix a, Eigen::VectorXd b, double lambda);
  static RegressionProblem ell_p(RowMatrix a, Eigen::VectorXd b, double p);
  static RegressionProblem gamma_p(RowMatrix a, Eigen::VectorXd b, double p);

  std::int64_t free_dim() const;  // n, or n*N for multiple
};

// Objective evaluated straight from the definition (no embedding), the
// independent route the embedding is tested against. x has free_dim()
// entries; for multiple it is vec(X), columns stacked.
double problem_objective(const RegressionProblem& problem, const Eigen::VectorXd& x);

struct EmbeddedProblem {
  RowMatrix a;         // embedded rows
  LossFamily family;   // per-row losses over the embedded system
  bool bias_column;    // responses occupy the last column; x' = (x, -1)
  std::int64_t free_dim;   // variable count, excluding the bias slot
  std::int64_t data_rows;  // rows [0, data_rows) carry data; the rest regularize

  EmbeddedProblem(RowMatrix a_, LossFamily family_, bool bias, std::int64_t free,
                  std::int64_t data)
      : a(std::move(a_)),
        family(std::move(family_)),
        bias_column(bias),
        free_dim(free),
        data_rows(data) {}
};

EmbeddedProblem embed(const RegressionProblem& problem);

// x' = (x, -1) when the embedding carries a bias column, x otherwise.
Eigen::VectorXd embedded_point(const EmbeddedProblem& emb, const Eigen::VectorXd& x);
// sum_i f_i(<a'_i, x'>); equals problem_objective on the source problem.
double embedded_objective(const EmbeddedProblem& emb, const Eigen::VectorXd& x);

struct SolveOptions {
  double epsilon = 0.3;
  SparsifyConfig sparsify;
  std::optional<double> s_min, s_max;  // override the automatic range
  bool compute_reference = false;
};

struct SolveReport {
  Eigen::VectorXd x;
  double objective = 0.0;             // original objective at x
  double sparsified_value = 0.0;      // F-tilde at x (embedded coordinates)
  std::optional<double> reference_objective;
  std::optional<double> ratio;        // objective / reference
  double s_min = 0.0, s_max = 0.0;    // range actually used
  int inner_iterations = 0;
  std::vector<double> inner_objectives;  // accepted inner-solver values
  Sparsifier sparsifier;
  SparsifyTrace trace;
  bool short_circuit = false;  // zero-objective instance, no sparsification run
  std::string note;
};

// Sparsify-then-optimize. When no range override is given: warm-start least
// squares on a deterministic row subsample gives x_ls, then
// s_max = min(F(0), 10 F(x_ls)) and
// s_min = min(max(1e-12 s_max, epsilon F(x_ls) / m_emb^4), s_max / 4)
// with m_emb the embedded row count. Instances whose objective at 0 or at
// the warm start is zero (the latter up to rounding, F(x_ls) <= 1e-20 F(0))
// short-circuit without sparsifying.
SolveReport solve(const RegressionProblem& problem, const SolveOptions& opts,
                  QueryLedger& ledger);

// Dense baseline on the full data, no sampling, no ledger: closed forms for
// linear / ridge / multiple, IRLS (tol 1e-10, cap 1e4 iterations) for ell_p /
// gamma_p, coordinate descent with a KKT stationarity check <= 1e-8 for
// lasso. Iteration-cap overruns throw.
std::pair<Eigen::VectorXd, double> reference_solve(const RegressionProblem& problem);

}  // namespace glms
