#pragma once

// Leverage scores of W^{1/2}A, exact and noisily served.
//
// sigma_i = w_i * a_i^T (A^T W A)^+ a_i, computed through a thin SVD of
// W^{1/2}A with singular values below 1e-12 * (largest) treated as zero.
// The estimator is the classical stand-in for the quantum routine: exact
// scores plus a deterministic multiplicative (1 +/- eps) factor per index.
//
// Weights are normalized by max(w) before factorization (leverage is
// invariant under positive scaling of w), which keeps the SVD well-scaled
// for the extreme weight magnitudes the multiscale recursion produces.

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "glms/matrix_io.hpp"
#include "glms/oracles.hpp"

namespace glms {

// Exact scores; w must be nonnegative and finite, length m. Rows with
// w_i = 0 get sigma_i = 0. Entries lie in [0,1]; the sum equals
// rank(W^{1/2}A). Throws std::runtime_error on non-finite results.
Eigen::VectorXd exact_leverage(const RowMatrix& a, const Eigen::VectorXd& w);

class LeverageEstimator {
 public:
  std::int64_t size() const { return sigma_.size(); }
  std::int64_t rank() const { return rank_; }
  double epsilon() const { return epsilon_; }
  const Eigen::VectorXd& weights() const { return w_; }

  // sigma-tilde_i = factor_i * sigma_i with factor_i in [1-eps, 1+eps].
  // Charges one matrix-row, r_i matrix-element, and one weight-eval query.
  double query(std::int64_t i) const;
  // t-tilde_i, the noisy sigma_i / w_i (same factor_i, computed from the
  // quadratic form directly so tiny w_i cannot underflow it). Same charges.
  double ratio_query(std::int64_t i) const;

  // Uncounted exact values, for certification and tests.
  double exact(std::int64_t i) const { return sigma_[i]; }
  double exact_ratio(std::int64_t i) const { return tform_[i]; }
  const Eigen::VectorXd& exact_all() const { return sigma_; }

  // Lets consumers book loss evaluations against the same ledger.
  void charge_loss() const { ledger_->charge(OracleKind::loss_eval); }

 private:
  friend LeverageEstimator mod_lev_approx(const RowMatrix&, const Eigen::VectorXd&,
                                          double, const NoiseConfig&, QueryLedger&,
                                          std::string);
  LeverageEstimator() = default;
  double factor(std::int64_t i) const;
  void charge(std::int64_t i) const;

  Eigen::VectorXd sigma_;  // exact leverage of W^{1/2}A
  Eigen::VectorXd tform_;  // exact t_i = a_i^T (A^T W A)^+ a_i
  Eigen::VectorXd w_;
  Eigen::VectorXd row_nnz_;
  double epsilon_ = 0.0;
  std::int64_t rank_ = 0;
  NoiseConfig noise_;
  std::string tag_;
  QueryLedger* ledger_ = nullptr;
};

// Builds the estimator: reads every row through a counted oracle view (m
// matrix-row queries, nnz matrix-element queries, m weight-eval queries),
// factorizes once, and serves per-index queries thereafter. epsilon in
// (0, 1]; w strictly positive. The tag keys the deterministic noise stream.
LeverageEstimator mod_lev_approx(const RowMatrix& a, const Eigen::VectorXd& w,
                                 double epsilon, const NoiseConfig& noise,
                                 QueryLedger& ledger, std::string tag = "lev");

struct SpectralReport {
  bool pass = false;
  double min_ratio = 0.0;  // smallest generalized eigenvalue of (A^T W A, A^T A)
  double max_ratio = 0.0;  // largest
  double tol = 0.0;
};

// Passes iff all generalized eigenvalues of A^T diag(w) A relative to A^T A
// lie in [1-tol, 1+tol]. Throws std::runtime_error if A is column-rank
// deficient.
SpectralReport spectral_check(const RowMatrix& a, const Eigen::VectorXd& w,
                              double tol);

}  // namespace glms
