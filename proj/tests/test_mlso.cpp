#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "glms/leverage.hpp"
#include "glms/losses.hpp"
#include "glms/mlso.hpp"
#include "glms/oracles.hpp"
#include "glms/rng.hpp"

#include "helpers.hpp"

using namespace glms;
using glms::testing::log_uniform_positive;
using glms::testing::random_dense;

TEST_SUITE_BEGIN("mlso");

TEST_CASE("log-ratio metric basics") {
  Eigen::VectorXd w(2), u(2);
  w << 1.0, 2.0;
  u << 2.0, 1.0;
  CHECK(metric_d(w, w) == 0.0);
  CHECK(metric_d(u, w) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(metric_d(u, w) == metric_d(w, u));

  Eigen::VectorXd bad(2);
  bad << 1.0, 0.0;
  CHECK_THROWS_AS(metric_d(bad, w), std::invalid_argument);
  CHECK_THROWS_AS(metric_d(w, Eigen::VectorXd::Ones(3)), std::invalid_argument);
}

TEST_CASE("log-ratio metric satisfies the triangle inequality") {
  Rng rng(51);
  for (int trial = 0; trial < 500; ++trial) {
    const std::int64_t m = 1 + rng.uniform_int(12);
    Eigen::VectorXd u = log_uniform_positive(rng, m, 1e-6, 1e6);
    Eigen::VectorXd v = log_uniform_positive(rng, m, 1e-6, 1e6);
    Eigen::VectorXd w = log_uniform_positive(rng, m, 1e-6, 1e6);
    CHECK(metric_d(u, v) <= metric_d(u, w) + metric_d(w, v) + 1e-12);
  }
}

TEST_CASE("quadratic losses make the update a constant map") {
  Rng rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t m = 4 + rng.uniform_int(30);
    const std::int64_t n = 1 + rng.uniform_int(5);
    RowMatrix a = random_dense(rng, m, n);
    LossFamily quad = LossFamily::quadratic(m);
    Eigen::VectorXd w = log_uniform_positive(rng, m, 1e-4, 1e4);
    const double s = std::exp(rng.uniform(-6.0, 6.0));

    Eigen::VectorXd out = update_phi(a, quad, w, s);
    for (std::int64_t i = 0; i < m; ++i) CHECK(out[i] == 1.0 / s);

    Eigen::VectorXd half = update_phi(a, quad, w, 2.0 * s);
    for (std::int64_t i = 0; i < m; ++i)
      CHECK(half[i] == doctest::Approx(out[i] / 2.0).epsilon(1e-15));
  }
}

TEST_CASE("noisy update stays within the stated distance of the exact one") {
  Rng rng(53);
  const std::int64_t m = 40;
  RowMatrix a = random_dense(rng, m, 5);
  LossFamily l1 = LossFamily::ell_p(m, 1.0);
  const double c_contr = 2.0;  // max{2L/c, 1/c} for these constants
  QueryLedger ledger;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd w = log_uniform_positive(rng, m, 1e-2, 1e2);
    const double s = std::exp(rng.uniform(-3.0, 3.0));
    LeverageEstimator est = mod_lev_approx(
        a, w, 0.1, NoiseConfig::on(0.1, 1000 + trial), ledger, "noisy-update");
    Eigen::VectorXd noisy = update_phi(a, l1, w, s, &est);
    Eigen::VectorXd exact = update_phi(a, l1, w, s);
    CHECK(metric_d(noisy, exact) <=
          std::log(c_contr) + std::log(1.1 / 0.9) + 1e-9);
  }
}

TEST_CASE("approximate-weight test recognizes exact fixed points") {
  Rng rng(54);
  RowMatrix a = random_dense(rng, 25, 4);
  LossFamily quad = LossFamily::quadratic(25);
  const double s = 4.0;
  Eigen::VectorXd w = (1.0 / s) * Eigen::VectorXd::Ones(25);

  CHECK(is_approx_weight(a, quad, w, s, 1.0));
  CHECK(!is_approx_weight(a, quad, w, 2.0 * s, 1.0));
  CHECK(is_approx_weight(a, quad, w, 2.0 * s, 2.0));
  CHECK(is_approx_weight(a, quad, w, 2.0 * s, 1e12));
  CHECK_THROWS_AS(is_approx_weight(a, quad, w, s, 0.5), std::invalid_argument);
}

TEST_CASE("gap measurement agrees with the update-map distance") {
  // Two independent numerical routes to the same quantity: the direct
  // sandwich gap versus d(w, phi_s(w)) through the update map.
  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t m = 10 + rng.uniform_int(30);
    RowMatrix a = random_dense(rng, m, 3);
    LossFamily fam = trial % 2 ? LossFamily::ell_p(m, 1.0)
                               : LossFamily::gamma_p(m, 1.0);
    Eigen::VectorXd w = log_uniform_positive(rng, m, 1e-2, 1e2);
    const double s = std::exp(rng.uniform(-2.0, 2.0));
    const double gap = approx_weight_gap(a, fam, w, s);
    const double via_update = metric_d(update_phi(a, fam, w, s), w);
    CHECK(std::fabs(gap - via_update) <= 1e-8 * std::max(1.0, via_update));
  }
}

TEST_CASE("initialization on the identity gives flat starting weights") {
  const std::int64_t n = 6;
  RowMatrix a = RowMatrix::from_dense(Eigen::MatrixXd::Identity(n, n));
  LossFamily quad = LossFamily::quadratic(n);
  QueryLedger ledger;
  InitBundle bundle =
      weight_initialize(a, quad, 1.0, 0.125, NoiseConfig::off(), ledger);
  CHECK(bundle.anchors.size() == n);
  for (std::int64_t i = 0; i < n; ++i) CHECK(bundle.anchors[i] == 1.0);
  for (std::int64_t i = 0; i < n; ++i) CHECK(bundle.w0[i] == 0.125);
  CHECK(bundle.c_init == doctest::Approx(8.0).epsilon(1e-15));
  CHECK(bundle.clamped_rows.empty());
  CHECK(is_approx_weight(a, bundle.modified, bundle.w0, 1.0, bundle.beta));
  CHECK(ledger.count(OracleKind::loss_eval) >=
        static_cast<std::uint64_t>(bundle.anchor_evals));
}

TEST_CASE("modified family sits above the original by the bump amount") {
  Rng rng(56);
  const std::int64_t m = 30;
  RowMatrix a = random_dense(rng, m, 4);
  LossFamily l1 = LossFamily::ell_p(m, 1.0);
  QueryLedger ledger;
  InitBundle bundle =
      weight_initialize(a, l1, 2.0, 0.01, NoiseConfig::off(), ledger);
  for (int trial = 0; trial < 50; ++trial) {
    const std::int64_t i = rng.uniform_int(m);
    const double x = rng.normal() * 2.0;
    const double diff = bundle.modified.eval(i, x) - l1.eval(i, x);
    CHECK(diff >= -1e-15);
    CHECK(diff == doctest::Approx(2.0 * bundle.w0[i] * x * x).epsilon(1e-10));
  }
}

TEST_CASE("initialization certifies its recorded factor on random instances") {
  Rng rng(57);
  for (int trial = 0; trial < 8; ++trial) {
    const std::int64_t m = 100 + rng.uniform_int(400);
    const std::int64_t n = 2 + rng.uniform_int(9);
    RowMatrix a = random_dense(rng, m, n, 0.8);
    LossFamily l1 = LossFamily::ell_p(m, 1.0);
    const double s_max = std::exp(rng.uniform(-2.0, 4.0));
    const double delta = 1e-4 * (0.5 + rng.uniform());
    QueryLedger ledger;
    InitBundle bundle = weight_initialize(a, l1, s_max, delta,
                                          NoiseConfig::on(0.5, 77 + trial), ledger);
    CHECK(is_approx_weight(a, bundle.modified, bundle.w0, s_max, bundle.beta));
    CHECK(bundle.beta_doublings <= 10);
  }
}

TEST_CASE("quadratic recursion reaches its fixed point in one round") {
  Rng rng(58);
  const std::int64_t m = 30;
  RowMatrix a = random_dense(rng, m, 4);
  LossFamily quad = LossFamily::quadratic(m);
  QueryLedger ledger;
  const std::int64_t j_min = -2, j_max = 3;

  const double s_top = std::ldexp(1.0, static_cast<int>(j_max));
  InitBundle bundle =
      weight_initialize(a, quad, s_top, 0.01, NoiseConfig::off(), ledger);
  QmlsoResult r = qmlso(a, bundle.modified, bundle.w0, j_min, j_max,
                        bundle.beta, 0.1, NoiseConfig::off(), ledger);
  // One exact update lands on the fixed point 1/s_top; the recursion must
  // keep it there bit for bit.
  QmlsoResult pure = qmlso(a, quad, update_phi(a, quad, bundle.w0, s_top),
                           j_min, j_max, 4.0, 0.1, NoiseConfig::off(), ledger);
  const double expected = std::ldexp(1.0, -static_cast<int>(j_max));
  const Eigen::VectorXd& top = pure.scheme.at(j_max);
  for (std::int64_t i = 0; i < m; ++i) CHECK(top[i] == expected);
  CHECK(r.scheme.count() == j_max - j_min + 1);
}

TEST_CASE("recursion outputs a certified scheme with dominating overestimates") {
  Rng rng(59);
  const std::int64_t m = 60, n = 5;
  RowMatrix a = random_dense(rng, m, n, 0.7);
  LossFamily g1 = LossFamily::gamma_p(m, 1.0);
  QueryLedger ledger;
  const std::int64_t j_min = -3, j_max = 2;
  const double s_top = std::ldexp(1.0, static_cast<int>(j_max));

  InitBundle bundle =
      weight_initialize(a, g1, s_top, 1e-3, NoiseConfig::on(0.5, 5), ledger);
  QmlsoResult r = qmlso(a, bundle.modified, bundle.w0, j_min, j_max,
                        bundle.beta, 0.1, NoiseConfig::on(0.1, 6), ledger);

  CHECK(r.scheme.j_min == j_min);
  CHECK(r.scheme.j_max == j_max);
  CHECK(r.scheme.alpha >= 1.0);
  CHECK(r.delta_contr == 0.75);
  CHECK(r.contraction_c == 2.0);

  // Both scheme conditions, re-verified here with exact scores.
  for (std::int64_t j = j_min; j <= j_max; ++j) {
    const Eigen::VectorXd& wj = r.scheme.at(j);
    const double s = std::ldexp(1.0, static_cast<int>(j));
    CHECK(is_approx_weight(a, bundle.modified, wj, s, r.scheme.alpha));
    if (j < j_max)
      CHECK(metric_d(r.scheme.at(j + 1), wj) <= std::log(r.scheme.alpha) + 1e-9);
  }

  // Domination and mass budget.
  for (std::int64_t j = j_min; j <= j_max; ++j) {
    Eigen::VectorXd sigma = exact_leverage(a, r.scheme.at(j));
    for (std::int64_t i = 0; i < m; ++i) CHECK(r.z.z[i] >= sigma[i] - 1e-12);
  }
  const double count = static_cast<double>(r.scheme.count());
  CHECK(r.z.tau <= (1.1 / 0.9) * count * static_cast<double>(n) + 1e-9);
  CHECK(r.z.tau == doctest::Approx(r.z.z.sum()).epsilon(1e-12));

  // Per-round decay stays under the recorded recurrence bound.
  REQUIRE(r.iterate_gap.size() == r.iterate_bound.size());
  for (std::size_t t = 0; t < r.iterate_gap.size(); ++t)
    CHECK(r.iterate_gap[t] <= r.iterate_bound[t] + 1e-9);
}

TEST_CASE("recursion validates its starting point") {
  Rng rng(60);
  RowMatrix a = random_dense(rng, 20, 3);
  LossFamily quad = LossFamily::quadratic(20);
  QueryLedger ledger;
  // Far from any fixed point and beta = 1 leaves no slack.
  Eigen::VectorXd w = 100.0 * Eigen::VectorXd::Ones(20);
  CHECK_THROWS_AS(
      qmlso(a, quad, w, -1, 2, 1.0, 0.1, NoiseConfig::off(), ledger),
      std::invalid_argument);
}

TEST_SUITE_END();
