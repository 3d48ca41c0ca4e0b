#include "glms/leverage.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace glms {

namespace {

struct Factorization {
  Eigen::VectorXd sigma;
  Eigen::VectorXd tform;
  std::int64_t rank = 0;
};

// Thin SVD of diag(sqrt(w/max w)) * A. Leverage is invariant under the
// normalization; the quadratic form t is rescaled back at the end.
Factorization leverage_factor(const RowMatrix& a, const Eigen::VectorXd& w) {
  const std::int64_t m = a.rows(), n = a.cols();
  if (w.size() != m)
    throw std::invalid_argument("leverage: weight length mismatch");
  double wmax = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    if (!std::isfinite(w[i]) || w[i] < 0.0)
      throw std::invalid_argument("leverage: weights must be finite and >= 0");
    wmax = std::max(wmax, w[i]);
  }
  Factorization out;
  out.sigma = Eigen::VectorXd::Zero(m);
  out.tform = Eigen::VectorXd::Zero(m);
  if (wmax == 0.0 || n == 0) return out;  // zero Gram matrix: all scores 0

  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, n);
  for (std::int64_t i = 0; i < m; ++i) {
    const double sw = std::sqrt(w[i] / wmax);
    if (sw == 0.0) continue;
    for (const RowEntry& e : a.row(i)) b(i, e.col) = sw * e.value;
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cutoff = 1e-12 * (s.size() > 0 ? s[0] : 0.0);
  std::int64_t rank = 0;
  while (rank < s.size() && s[rank] > cutoff) ++rank;
  out.rank = rank;

  const auto u = svd.matrixU().leftCols(rank);
  for (std::int64_t i = 0; i < m; ++i) {
    double v = u.row(i).squaredNorm();
    out.sigma[i] = std::min(1.0, std::max(0.0, v));
  }

  // t_i = || S_r^{-1} V_r^T a_i ||^2 / wmax, with a_i the *unscaled* row.
  const auto vr = svd.matrixV().leftCols(rank);
  Eigen::VectorXd tmp(rank);
  for (std::int64_t i = 0; i < m; ++i) {
    tmp.setZero();
    for (const RowEntry& e : a.row(i)) tmp += e.value * vr.row(e.col).transpose();
    double acc = 0.0;
    for (std::int64_t k = 0; k < rank; ++k) {
      const double c = tmp[k] / s[k];
      acc += c * c;
    }
    out.tform[i] = acc / wmax;
  }

  if (!out.sigma.allFinite() || !out.tform.allFinite())
    throw std::runtime_error("leverage: non-finite scores (catastrophic conditioning)");
  return out;
}

}  // namespace

Eigen::VectorXd exact_leverage(const RowMatrix& a, const Eigen::VectorXd& w) {
  return leverage_factor(a, w).sigma;
}

double LeverageEstimator::factor(std::int64_t i) const {
  return noisy_factor(noise_, tag_, i);
}

void LeverageEstimator::charge(std::int64_t i) const {
  ledger_->charge(OracleKind::matrix_row);
  ledger_->charge(OracleKind::matrix_element,
                  static_cast<std::uint64_t>(row_nnz_[i]));
  ledger_->charge(OracleKind::weight_eval);
}

double LeverageEstimator::query(std::int64_t i) const {
  if (i < 0 || i >= sigma_.size())
    throw std::out_of_range("LeverageEstimator::query: index out of range");
  charge(i);
  return factor(i) * sigma_[i];
}

double LeverageEstimator::ratio_query(std::int64_t i) const {
  if (i < 0 || i >= sigma_.size())
    throw std::out_of_range("LeverageEstimator::ratio_query: index out of range");
  charge(i);
  return factor(i) * tform_[i];
}

LeverageEstimator mod_lev_approx(const RowMatrix& a, const Eigen::VectorXd& w,
                                 double epsilon, const NoiseConfig& noise,
                                 QueryLedger& ledger, std::string tag) {
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("mod_lev_approx: epsilon must be in (0, 1]");

  // The build reads the whole matrix and weight vector through counted
  // queries.
  MatrixOracle oracle(a, ledger);
  Eigen::VectorXd row_nnz(a.rows());
  for (std::int64_t i = 0; i < a.rows(); ++i) {
    auto r = oracle.row(i);
    row_nnz[i] = static_cast<double>(r.size());
    ledger.charge(OracleKind::weight_eval);
  }

  LeverageEstimator est;
  auto fac = leverage_factor(a, w);
  est.sigma_ = std::move(fac.sigma);
  est.tform_ = std::move(fac.tform);
  est.rank_ = fac.rank;
  est.w_ = w;
  est.row_nnz_ = std::move(row_nnz);
  est.epsilon_ = epsilon;
  // The injector's config caps its band at [0,1); an estimator epsilon of
  // exactly 1 is served with a marginally tighter band, which still meets
  // the (1 +/- eps) contract.
  est.noise_ = noise.with_epsilon(std::min(epsilon, 0.999999999));
  est.tag_ = std::move(tag);
  est.ledger_ = &ledger;
  return est;
}

SpectralReport spectral_check(const RowMatrix& a, const Eigen::VectorXd& w,
                              double tol) {
  const std::int64_t m = a.rows(), n = a.cols();
  if (w.size() != m) throw std::invalid_argument("spectral_check: length mismatch");
  if (!(tol >= 0.0)) throw std::invalid_argument("spectral_check: tol must be >= 0");

  Eigen::MatrixXd ad = a.to_dense();
  Eigen::MatrixXd g0 = ad.transpose() * ad;
  Eigen::MatrixXd g1 = ad.transpose() * w.asDiagonal() * ad;

  // Rank check on A itself; the generalized problem needs A^T A > 0.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(ad);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[s.size() - 1] <= 1e-12 * s[0])
    throw std::runtime_error("spectral_check: A is column-rank deficient");

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(g1, g0,
                                                                Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("spectral_check: eigensolver failed");
  SpectralReport rep;
  rep.tol = tol;
  rep.min_ratio = eig.eigenvalues().minCoeff();
  rep.max_ratio = eig.eigenvalues().maxCoeff();
  rep.pass = rep.min_ratio >= 1.0 - tol && rep.max_ratio <= 1.0 + tol;
  (void)n;
  return rep;
}

}  // namespace glms
