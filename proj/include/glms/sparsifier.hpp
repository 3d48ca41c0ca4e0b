#pragma once

// Importance-sampled GLM sparsification.
//
// Draws M row indices proportional to the overestimate vector z, estimates
// ||z||_1, and accumulates w-tilde_{theta} += nu-tilde / (1.1 * M * z_theta)
// so that F-tilde(x) = sum w-tilde_i f_i(<a_i, x>) tracks F(x) to a
// relative epsilon over the scale range [s_min, s_max].

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "glms/losses.hpp"
#include "glms/matrix_io.hpp"
#include "glms/mlso.hpp"
#include "glms/oracles.hpp"

namespace glms {

struct Sparsifier {
  std::vector<std::int64_t> indices;  // sorted, unique, in [0, m)
  std::vector<double> weights;        // aligned with indices, all > 0
  std::int64_t m = 0;                 // ambient row count
  std::int64_t sample_count = 0;      // M
  double nu_tilde = 0.0;              // estimated ||z||_1
  double s_min = 0.0, s_max = 0.0;
  double epsilon = 0.0;               // user-facing target
  std::uint64_t seed = 0;

  std::int64_t nnz() const { return static_cast<std::int64_t>(indices.size()); }
  Eigen::VectorXd to_dense() const;
};

// M i.i.d. draws, index i with probability z_i/||z||_1, via a Vose alias
// table (O(m) build, O(1) per draw, fully deterministic). Charges m + M
// overestimate-eval queries (build + one per draw). Throws if z has no
// positive entry or M < 1.
std::vector<std::int64_t> multi_sample(const OverestimateVector& z, std::int64_t m_draws,
                                       std::uint64_t seed, QueryLedger& ledger);

// nu-tilde in [(1-eps_sum) ||z||_1, (1+eps_sum) ||z||_1]; exact sum when
// noise is disabled. Charges m overestimate-eval queries. epsilon_sum in
// (0,1).
double sum_estimate(const OverestimateVector& z, double epsilon_sum,
                    const NoiseConfig& noise, std::uint64_t seed,
                    QueryLedger& ledger);

struct SparsifyConfig {
  double c_m = 8.0;         // sample-count constant
  std::uint64_t seed = 0;
  NoiseConfig noise = NoiseConfig::off();
  bool force_full_scale_loop = false;  // disable the homogeneous fast path
  std::optional<std::int64_t> sample_override;  // explicit M, for tests
};

// Diagnostics a report can echo.
struct SparsifyTrace {
  std::int64_t j_min = 0, j_max = 0;
  double delta_init = 0.0;
  double beta = 0.0;
  int beta_doublings = 0;
  int rounds = 0;
  bool t_clamped = false;
  double alpha = 0.0;
  double tau = 0.0;       // exact ||z||_1
  double nu_tilde = 0.0;
  std::int64_t sample_count = 0;
  bool homogeneous_fast_path = false;
  bool epsilon_regime_warning = false;  // epsilon > 1/r
  std::vector<std::int64_t> clamped_rows;
};

// The full pipeline: weight_initialize -> qmlso -> multi_sample ->
// sum_estimate -> reweighting. Internally targets epsilon/2. M =
// ceil(c_m * ||z||_1 * ln(max{m,3}) / (epsilon/2)^2) unless overridden.
// Throws on invalid range or propagated subroutine failures.
Sparsifier qglm_sparsify(const RowMatrix& a, const LossFamily& family,
                         double epsilon, double s_min, double s_max,
                         const SparsifyConfig& cfg, QueryLedger& ledger,
                         SparsifyTrace* trace = nullptr);

// Full objective F(x) = sum_i f_i(<a_i, x>).
double glm_objective(const RowMatrix& a, const LossFamily& family,
                     const Eigen::VectorXd& x);
// Sparsified objective F-tilde(x) over the stored support.
double sparsified_objective(const RowMatrix& a, const LossFamily& family,
                            const Sparsifier& sp, const Eigen::VectorXd& x);

struct ValidationReport {
  std::int64_t points = 0;
  std::int64_t violations = 0;
  double violation_fraction = 0.0;
  double max_rel_error = 0.0;
  double epsilon = 0.0;
  std::int64_t attempts = 0;  // direction draws spent landing in range
};

// Draws num_points directions, rescales each onto the objective range
// [s_min, s_max] (closed form for homogeneous families, exponential
// bracketing + bisection otherwise), and reports the fraction of points
// with |F-tilde - F| > epsilon * F. Throws when the retry budget cannot
// land points in range.
ValidationReport validate_sparsifier(const RowMatrix& a, const LossFamily& family,
                                     const Sparsifier& sp, std::int64_t num_points,
                                     std::uint64_t seed);

nlohmann::json sparsifier_to_json(const Sparsifier& sp);
Sparsifier sparsifier_from_json(const nlohmann::json& j);
void save_sparsifier(const Sparsifier& sp, const std::string& path);
Sparsifier load_sparsifier(const std::string& path);
// Two-column "index weight" text export.
void save_sparsifier_text(const Sparsifier& sp, const std::string& path);

}  // namespace glms
