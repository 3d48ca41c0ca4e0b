#pragma once

// Multiscale leverage-score overestimates.
//
// Pieces: the log-ratio metric d, the weight update map phi_s (exact and
// noisy), the approximate-weight test, weight initialization via anchors
// and a quadratic bump, and the contraction-then-recursion driver that
// produces an approximate weight scheme over dyadic scales [2^j_min,
// 2^j_max] together with an l1-bounded overestimate vector z.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glms/leverage.hpp"
#include "glms/losses.hpp"
#include "glms/matrix_io.hpp"
#include "glms/oracles.hpp"

namespace glms {

// d(u, w) = max_i |ln(u_i / w_i)|; computed as |ln u_i - ln w_i| so extreme
// magnitude spreads cannot overflow. Throws on nonpositive entries or
// length mismatch.
double metric_d(const Eigen::VectorXd& u, const Eigen::VectorXd& w);

// Degenerate-row policy shared by the update map and the approximate-weight
// test: rows whose leverage score is at or below this threshold take the
// closed-form t->0 limit of f(sqrt(t))/(s*t) when finite, else the floor
// clamp.
inline constexpr double kDegenerateLeverage = 1e-14;
inline constexpr double kWeightFloor = 1e-300;
inline constexpr double kWeightCeil = 1e300;

// One step of the update map: w'_i = f_i(sqrt(t_i)) / (s * t_i) with
// t_i = sigma_i / w_i. Exact scores when est is null; the estimator's noisy
// ratio queries otherwise (est must have been built on exactly this w; that
// is checked). Rows hitting the degenerate policy or the clamps get their
// indices appended to *clamped when provided. Noisy calls charge one
// loss-eval per row in addition to the estimator's own query charges.
Eigen::VectorXd update_phi(const RowMatrix& a, const LossFamily& family,
                           const Eigen::VectorXd& w, double s,
                           const LeverageEstimator* est = nullptr,
                           std::vector<std::int64_t>* clamped = nullptr);

// max_i |ln( f_i(sqrt(t_i)) / (w_i * t_i * s) )| over non-degenerate rows,
// with t_i = a_i^T (sum_k w_k a_k a_k^T)^+ a_i computed through an
// eigendecomposition of the Gram matrix — a numerical route independent of
// update_phi's SVD, so the two can cross-check each other.
double approx_weight_gap(const RowMatrix& a, const LossFamily& family,
                         const Eigen::VectorXd& w, double s);

// True iff s/alpha <= f_i(sqrt(t_i))/(w_i t_i) <= alpha*s for every
// non-degenerate row; equivalently approx_weight_gap(...) <= ln(alpha), with
// 1e-12 slack on the log scale so exact-boundary cases pass.
bool is_approx_weight(const RowMatrix& a, const LossFamily& family,
                      const Eigen::VectorXd& w, double s, double alpha);

struct InitBundle {
  LossFamily modified = LossFamily::quadratic(1);  // f* = f + s_max * w0_i * t^2
  Eigen::VectorXd w0;               // delta_init / sigma-tilde_i
  double beta = 0.0;                // certified approximation factor
  Eigen::VectorXd anchors;          // t-hat_i with f_i(t-hat_i) in [s_max/2, s_max]
  double c_init = 0.0;              // 2 * (2L/c)^(2/theta)
  double delta_init = 0.0;
  double s_max = 0.0;
  std::vector<std::int64_t> clamped_rows;  // sigma-tilde_i ~ 0, w0 clamped to 1
  int beta_doublings = 0;           // extra doublings needed past the formula
  std::int64_t anchor_evals = 0;    // loss evaluations spent on anchors
};

// Anchor search per row, leverage at H = diag(anchor^-2) with a half-accurate
// estimate, w0 = delta_init / sigma-tilde, quadratic bump, and an a
// posteriori certification of beta = 3 * (2L/c)^(4/theta) * m / delta_init
// (the formula value doubled as safety), doubling at most 10 more times
// before giving up. Throws when certification fails after the doublings.
InitBundle weight_initialize(const RowMatrix& a, const LossFamily& family,
                             double s_max, double delta_init,
                             const NoiseConfig& noise, QueryLedger& ledger);

struct WeightScheme {
  std::int64_t j_min = 0, j_max = 0;
  std::vector<Eigen::VectorXd> weights;  // index j - j_min
  double alpha = 0.0;

  std::int64_t count() const { return j_max - j_min + 1; }  // |J|
  const Eigen::VectorXd& at(std::int64_t j) const {
    return weights.at(static_cast<std::size_t>(j - j_min));
  }
};

struct OverestimateVector {
  Eigen::VectorXd z;
  double tau = 0.0;      // ||z||_1
  double epsilon = 0.0;  // aggregation slack used to build z
};

struct QmlsoResult {
  WeightScheme scheme;
  OverestimateVector z;
  int rounds = 0;          // contraction rounds T actually run
  bool t_clamped = false;  // T formula degenerated and was clamped
  std::vector<double> iterate_gap;    // d(w_t, w_{t+1}) per contraction round
  std::vector<double> iterate_bound;  // recurrence bound for the same round
  std::vector<std::int64_t> clamped_rows;  // union over all updates
  double delta_contr = 0.0;
  double contraction_c = 0.0;  // C = max{2L/c, 1/c}
};

// The multiscale driver. Precondition: w0 strictly positive and
// beta-approximate at scale 2^j_max (checked; throws std::invalid_argument
// otherwise), j_min <= j_max, epsilon in (0,1) (0.1 canonically). Output
// invariants — both scheme conditions at the certified alpha, z domination
// of the exact per-scale scores, and the l1 budget
// ((1+eps)/(1-eps)) * |J| * n — are asserted before returning.
QmlsoResult qmlso(const RowMatrix& a, const LossFamily& family,
                  const Eigen::VectorXd& w0, std::int64_t j_min,
                  std::int64_t j_max, double beta, double epsilon,
                  const NoiseConfig& noise, QueryLedger& ledger);

}  // namespace glms
