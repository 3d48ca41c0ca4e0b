#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "glms/leverage.hpp"
#include "glms/matrix_io.hpp"
#include "glms/oracles.hpp"
#include "glms/rng.hpp"

#include "helpers.hpp"

using namespace glms;
using glms::testing::log_uniform_positive;
using glms::testing::random_dense;

namespace {

std::int64_t dense_rank(const RowMatrix& a, const Eigen::VectorXd& w) {
  Eigen::MatrixXd d = w.array().sqrt().matrix().asDiagonal() * a.to_dense();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  std::int64_t r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s[k] > 1e-10 * s[0]) ++r;
  return r;
}

}  // namespace

TEST_SUITE_BEGIN("leverage");

TEST_CASE("identity rows carry full leverage") {
  RowMatrix a = RowMatrix::from_dense(Eigen::MatrixXd::Identity(3, 3));
  Eigen::VectorXd sigma = exact_leverage(a, Eigen::VectorXd::Ones(3));
  for (int i = 0; i < 3; ++i) CHECK(sigma[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("duplicated rows split their shared direction") {
  Eigen::MatrixXd d(3, 2);
  d << 1, 0, 1, 0, 0, 1;
  RowMatrix a = RowMatrix::from_dense(d);
  Eigen::VectorXd sigma = exact_leverage(a, Eigen::VectorXd::Ones(3));
  CHECK(sigma[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sigma[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sigma[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scores are bounded, sum to the rank, and ignore weight scaling") {
  Rng rng(41);
  for (int trial = 0; trial < 25; ++trial) {
    const std::int64_t m = 5 + rng.uniform_int(60);
    const std::int64_t n = 1 + rng.uniform_int(7);
    RowMatrix a = random_dense(rng, m, n, trial % 2 ? 0.5 : 1.0);
    Eigen::VectorXd w = log_uniform_positive(rng, m, 1e-2, 1e2);

    Eigen::VectorXd sigma = exact_leverage(a, w);
    double sum = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      CHECK(sigma[i] >= 0.0);
      CHECK(sigma[i] <= 1.0 + 1e-12);
      sum += sigma[i];
    }
    CHECK(std::fabs(sum - static_cast<double>(dense_rank(a, w))) <= 1e-8);

    for (double alpha : {1e-6, 3.0, 1e6}) {
      Eigen::VectorXd scaled = exact_leverage(a, alpha * w);
      for (std::int64_t i = 0; i < m; ++i)
        CHECK(std::fabs(scaled[i] - sigma[i]) <= 1e-10);
    }
  }
}

TEST_CASE("rank-deficient designs still sum to the rank") {
  Rng rng(42);
  // Duplicate one column so the rank drops below n.
  const std::int64_t m = 40, n = 5;
  Eigen::MatrixXd d(m, n);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) d(i, j) = rng.normal();
  d.col(n - 1) = 2.0 * d.col(0);
  RowMatrix a = RowMatrix::from_dense(d);
  Eigen::VectorXd sigma = exact_leverage(a, Eigen::VectorXd::Ones(m));
  CHECK(std::fabs(sigma.sum() - static_cast<double>(n - 1)) <= 1e-8);
}

TEST_CASE("zero weight or zero row yields zero leverage") {
  Rng rng(43);
  RowMatrix a = random_dense(rng, 10, 3);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(10);
  w[4] = 0.0;
  CHECK(exact_leverage(a, w)[4] == 0.0);

  std::vector<std::vector<RowEntry>> rows(5);
  rows[0] = {{0, 1.0}};
  rows[1] = {{1, 1.0}};
  rows[2] = {};  // structurally empty row
  rows[3] = {{0, 2.0}, {1, -1.0}};
  rows[4] = {{1, 0.5}};
  RowMatrix z = RowMatrix::from_rows(5, 2, rows);
  CHECK(exact_leverage(z, Eigen::VectorXd::Ones(5))[2] == 0.0);
}

TEST_CASE("estimator serves banded scores and counts its queries") {
  Rng rng(44);
  const std::int64_t m = 1000;
  RowMatrix a = random_dense(rng, m, 8, 0.6);
  Eigen::VectorXd w = log_uniform_positive(rng, m, 0.1, 10.0);

  QueryLedger ledger;
  LeverageEstimator exact_est =
      mod_lev_approx(a, w, 0.1, NoiseConfig::off(), ledger, "exact");
  Eigen::VectorXd sigma = exact_leverage(a, w);
  for (std::int64_t i = 0; i < m; i += 37)
    CHECK(exact_est.query(i) == sigma[i]);

  LeverageEstimator noisy =
      mod_lev_approx(a, w, 0.1, NoiseConfig::on(0.1, 7), ledger, "noisy");
  const auto rows_before = ledger.count(OracleKind::matrix_row);
  const auto weights_before = ledger.count(OracleKind::weight_eval);
  std::int64_t queried = 0;
  for (std::int64_t i = 0; i < m; ++i) {
    const double st = noisy.query(i);
    ++queried;
    if (sigma[i] > 0.0) {
      const double ratio = st / sigma[i];
      CHECK(ratio >= 0.9 - 1e-12);
      CHECK(ratio <= 1.1 + 1e-12);
    }
  }
  CHECK(ledger.count(OracleKind::matrix_row) - rows_before ==
        static_cast<std::uint64_t>(queried));
  CHECK(ledger.count(OracleKind::weight_eval) - weights_before ==
        static_cast<std::uint64_t>(queried));

  CHECK_THROWS_AS(noisy.query(m), std::out_of_range);
  CHECK_THROWS_AS(
      mod_lev_approx(a, w, 0.0, NoiseConfig::off(), ledger, "bad"),
      std::invalid_argument);
}

TEST_CASE("ratio queries match scores divided by weights") {
  Rng rng(45);
  RowMatrix a = random_dense(rng, 50, 4);
  Eigen::VectorXd w = log_uniform_positive(rng, 50, 1e-3, 1e3);
  QueryLedger ledger;
  LeverageEstimator est = mod_lev_approx(a, w, 0.5, NoiseConfig::off(), ledger);
  Eigen::VectorXd sigma = exact_leverage(a, w);
  for (std::int64_t i = 0; i < 50; ++i) {
    const double t = est.ratio_query(i);
    CHECK(std::fabs(t * w[i] - sigma[i]) <= 1e-10 * std::max(1.0, sigma[i]));
  }
}

TEST_CASE("spectral check accepts unit weights and rejects a uniform inflation") {
  Rng rng(46);
  RowMatrix a = random_dense(rng, 30, 4);
  SpectralReport ones = spectral_check(a, Eigen::VectorXd::Ones(30), 1e-9);
  CHECK(ones.pass);
  CHECK(ones.min_ratio == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ones.max_ratio == doctest::Approx(1.0).epsilon(1e-9));

  SpectralReport doubled = spectral_check(a, 2.0 * Eigen::VectorXd::Ones(30), 0.5);
  CHECK(!doubled.pass);
  CHECK(doubled.max_ratio == doctest::Approx(2.0).epsilon(1e-9));

  Eigen::MatrixXd deficient = Eigen::MatrixXd::Zero(10, 3);
  deficient.col(0).setOnes();
  CHECK_THROWS_AS(
      spectral_check(RowMatrix::from_dense(deficient), Eigen::VectorXd::Ones(10), 0.5),
      std::runtime_error);
}

TEST_SUITE_END();
