#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "glms/losses.hpp"
#include "glms/matrix_io.hpp"
#include "glms/oracles.hpp"
#include "glms/rng.hpp"
#include "glms/sparsifier.hpp"

#include "helpers.hpp"

using namespace glms;
using glms::testing::place_in_range;
using glms::testing::random_dense;
using glms::testing::temp_path;

namespace {

OverestimateVector make_overestimates(Eigen::VectorXd z) {
  OverestimateVector out;
  out.tau = z.sum();
  out.z = std::move(z);
  out.epsilon = 0.1;
  return out;
}

Sparsifier dense_ones_sparsifier(std::int64_t m, double weight, double s_min,
                                 double s_max, double epsilon) {
  Sparsifier sp;
  sp.m = m;
  sp.sample_count = m;
  sp.nu_tilde = static_cast<double>(m);
  sp.s_min = s_min;
  sp.s_max = s_max;
  sp.epsilon = epsilon;
  for (std::int64_t i = 0; i < m; ++i) {
    sp.indices.push_back(i);
    sp.weights.push_back(weight);
  }
  return sp;
}

}  // namespace

TEST_SUITE_BEGIN("sparsifier");

TEST_CASE("a point mass is sampled verbatim") {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(3);
  z[0] = 1.0;
  QueryLedger ledger;
  auto draws = multi_sample(make_overestimates(z), 50, 7, ledger);
  REQUIRE(draws.size() == 50);
  for (auto idx : draws) CHECK(idx == 0);
  CHECK(ledger.count(OracleKind::overestimate_eval) == 3 + 50);
}

TEST_CASE("uniform mass gives near-uniform empirical frequencies") {
  Eigen::VectorXd z = Eigen::VectorXd::Ones(4);
  QueryLedger ledger;
  auto draws = multi_sample(make_overestimates(z), 4000, 11, ledger);
  std::array<std::int64_t, 4> hits{0, 0, 0, 0};
  for (auto idx : draws) ++hits[static_cast<std::size_t>(idx)];
  for (auto h : hits) {
    const double freq = static_cast<double>(h) / 4000.0;
    CHECK(freq >= 0.2);
    CHECK(freq <= 0.3);
  }
}

TEST_CASE("sampling is seed-deterministic") {
  Eigen::VectorXd z(5);
  z << 0.1, 3.0, 0.5, 2.0, 1.0;
  QueryLedger ledger;
  auto a = multi_sample(make_overestimates(z), 200, 42, ledger);
  auto b = multi_sample(make_overestimates(z), 200, 42, ledger);
  CHECK(a == b);
  auto c = multi_sample(make_overestimates(z), 200, 43, ledger);
  CHECK(a != c);
}

TEST_CASE("sampling rejects degenerate inputs") {
  QueryLedger ledger;
  CHECK_THROWS_AS(multi_sample(make_overestimates(Eigen::VectorXd::Zero(3)), 5, 1, ledger),
                  std::runtime_error);
  CHECK_THROWS_AS(multi_sample(make_overestimates(Eigen::VectorXd::Ones(3)), 0, 1, ledger),
                  std::runtime_error);
}

TEST_CASE("sum estimation is exact when quiet and banded when noisy") {
  Eigen::VectorXd z(3);
  z << 1.0, 2.0, 3.0;
  QueryLedger ledger;
  CHECK(sum_estimate(make_overestimates(z), 0.1, NoiseConfig::off(), 1, ledger) == 6.0);

  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const double est = sum_estimate(make_overestimates(z), 0.1,
                                    NoiseConfig::on(0.1, seed), seed, ledger);
    CHECK(est >= 0.9 * 6.0 - 1e-12);
    CHECK(est <= 1.1 * 6.0 + 1e-12);
  }

  CHECK(sum_estimate(make_overestimates(Eigen::VectorXd::Zero(4)), 0.1,
                     NoiseConfig::on(0.1, 9), 9, ledger) == 0.0);
  CHECK_THROWS_AS(sum_estimate(make_overestimates(z), 0.0, NoiseConfig::off(), 1, ledger),
                  std::runtime_error);
}

TEST_CASE("reweighted sampling is unbiased up to the fixed margin") {
  Rng rng(61);
  const std::int64_t m = 20;
  Eigen::VectorXd z(m), g(m);
  for (std::int64_t i = 0; i < m; ++i) {
    z[i] = 0.05 + rng.uniform();
    g[i] = 0.1 + rng.uniform(0.0, 2.0);
  }
  OverestimateVector ov = make_overestimates(z);
  const double tau = ov.tau;
  const std::int64_t samples = 100;

  QueryLedger ledger;
  double mean = 0.0;
  const int runs = 10000;
  for (int run = 0; run < runs; ++run) {
    auto draws = multi_sample(ov, samples, 1000 + static_cast<std::uint64_t>(run), ledger);
    double acc = 0.0;
    for (auto idx : draws)
      acc += tau / (1.1 * static_cast<double>(samples) * z[idx]) * g[idx];
    mean += acc;
  }
  mean /= static_cast<double>(runs);
  const double expected = g.sum() / 1.1;
  CHECK(std::fabs(mean - expected) <= 0.02 * expected);
}

TEST_CASE("a point-mass overestimate concentrates all weight on its row") {
  const std::int64_t m = 10;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
  z[7] = 0.42;
  OverestimateVector ov = make_overestimates(z);
  QueryLedger ledger;
  const std::int64_t samples = 64;
  auto draws = multi_sample(ov, samples, 3, ledger);
  const double nu = sum_estimate(ov, 0.1, NoiseConfig::off(), 3, ledger);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
  for (auto idx : draws)
    acc[idx] += nu / (1.1 * static_cast<double>(samples) * z[idx]);
  for (std::int64_t i = 0; i < m; ++i) {
    if (i == 7)
      CHECK(acc[i] == doctest::Approx(nu / (1.1 * z[7])).epsilon(1e-13));
    else
      CHECK(acc[i] == 0.0);
  }
}

TEST_CASE("full pipeline output respects its structural contract") {
  Rng rng(62);
  const std::int64_t m = 150, n = 4;
  RowMatrix a = random_dense(rng, m, n, 0.8);
  LossFamily g1 = LossFamily::gamma_p(m, 1.0);
  Eigen::VectorXd probe = place_in_range(a, g1, rng, 50.0, 80.0);
  const double f0 = glms::testing::objective_at(a, g1, probe);
  const double s_min = f0 / 8.0, s_max = f0 * 8.0;

  SparsifyConfig cfg;
  cfg.seed = 17;
  cfg.noise = NoiseConfig::on(0.1, 17);
  QueryLedger ledger;
  SparsifyTrace trace;
  Sparsifier sp = qglm_sparsify(a, g1, 0.3, s_min, s_max, cfg, ledger, &trace);

  CHECK(sp.m == m);
  CHECK(sp.nnz() <= sp.sample_count);
  CHECK(sp.epsilon == 0.3);
  CHECK(sp.s_min == s_min);
  CHECK(sp.s_max == s_max);
  for (std::size_t k = 0; k < sp.indices.size(); ++k) {
    CHECK(sp.indices[k] >= 0);
    CHECK(sp.indices[k] < m);
    if (k > 0) CHECK(sp.indices[k] > sp.indices[k - 1]);
    CHECK(sp.weights[k] > 0.0);
  }

  // The committed formulas, recomputed from the recorded diagnostics.
  CHECK(trace.sample_count == sp.sample_count);
  const double eps_eff = 0.3 / 2.0;
  const std::int64_t expect_m = static_cast<std::int64_t>(std::ceil(
      8.0 * trace.tau * std::log(static_cast<double>(m)) / (eps_eff * eps_eff)));
  CHECK(sp.sample_count == expect_m);
  CHECK(trace.delta_init ==
        doctest::Approx(eps_eff * s_min /
                        (8.0 * std::pow(static_cast<double>(m), 3.0) * s_max))
            .epsilon(1e-12));
  CHECK(trace.j_min <= trace.j_max);
  CHECK(!trace.homogeneous_fast_path);
  CHECK(trace.nu_tilde >= (1.0 - 0.1) * trace.tau - 1e-12);
  CHECK(trace.nu_tilde <= (1.0 + 0.1) * trace.tau + 1e-12);
  CHECK(sp.nu_tilde == trace.nu_tilde);
  // r = 4 here, so 0.3 > 1/r triggers the regime warning.
  CHECK(trace.epsilon_regime_warning);

  // Determinism: an identical configuration reproduces the sparsifier bit
  // for bit.
  QueryLedger ledger2;
  Sparsifier sp2 = qglm_sparsify(a, g1, 0.3, s_min, s_max, cfg, ledger2);
  CHECK(sp2.indices == sp.indices);
  CHECK(sp2.weights == sp.weights);
  CHECK(sp2.nu_tilde == sp.nu_tilde);
}

TEST_CASE("homogeneous families skip the scale loop unless forced") {
  Rng rng(63);
  const std::int64_t m = 120, n = 4;
  RowMatrix a = random_dense(rng, m, n);
  LossFamily l1 = LossFamily::ell_p(m, 1.0);
  Eigen::VectorXd probe = place_in_range(a, l1, rng, 50.0, 80.0);
  const double f0 = glms::testing::objective_at(a, l1, probe);

  SparsifyConfig cfg;
  cfg.seed = 5;
  QueryLedger ledger;
  SparsifyTrace fast;
  qglm_sparsify(a, l1, 0.2, f0 / 8.0, f0 * 8.0, cfg, ledger, &fast);
  CHECK(fast.homogeneous_fast_path);
  CHECK(fast.j_min == fast.j_max);
  CHECK(!fast.epsilon_regime_warning);  // 0.2 < 1/r = 0.25

  cfg.force_full_scale_loop = true;
  SparsifyTrace full;
  qglm_sparsify(a, l1, 0.2, f0 / 8.0, f0 * 8.0, cfg, ledger, &full);
  CHECK(!full.homogeneous_fast_path);
  CHECK(full.j_min < full.j_max);
}

TEST_CASE("validation flags exactly the points outside the guarantee") {
  Rng rng(64);
  const std::int64_t m = 40, n = 3;
  RowMatrix a = random_dense(rng, m, n);
  LossFamily l1 = LossFamily::ell_p(m, 1.0);
  Eigen::VectorXd probe = place_in_range(a, l1, rng, 10.0, 20.0);
  const double f0 = glms::testing::objective_at(a, l1, probe);
  const double s_min = f0 / 4.0, s_max = f0 * 4.0;

  Sparsifier exact = dense_ones_sparsifier(m, 1.0, s_min, s_max, 1e-6);
  ValidationReport clean = validate_sparsifier(a, l1, exact, 50, 1);
  CHECK(clean.points == 50);
  CHECK(clean.violations == 0);
  CHECK(clean.violation_fraction == 0.0);
  CHECK(clean.max_rel_error <= 1e-12);

  Sparsifier doubled =
      dense_ones_sparsifier(m, 2.0, s_min, s_max, 0.5 * (1.0 - 1e-9));
  ValidationReport bad = validate_sparsifier(a, l1, doubled, 50, 1);
  CHECK(bad.violations == 50);
  CHECK(bad.max_rel_error == doctest::Approx(1.0).epsilon(1e-9));

  doubled.epsilon = 1.0;
  ValidationReport tolerated = validate_sparsifier(a, l1, doubled, 50, 1);
  CHECK(tolerated.violations == 0);
}

TEST_CASE("serialization round trips bit for bit") {
  Rng rng(65);
  const std::int64_t m = 80, n = 3;
  RowMatrix a = random_dense(rng, m, n);
  LossFamily l1 = LossFamily::ell_p(m, 1.0);
  Eigen::VectorXd probe = place_in_range(a, l1, rng, 30.0, 60.0);
  const double f0 = glms::testing::objective_at(a, l1, probe);
  SparsifyConfig cfg;
  cfg.seed = 23;
  cfg.noise = NoiseConfig::on(0.1, 23);
  QueryLedger ledger;
  Sparsifier sp = qglm_sparsify(a, l1, 0.4, f0 / 4.0, f0 * 4.0, cfg, ledger);

  Sparsifier via_json = sparsifier_from_json(sparsifier_to_json(sp));
  CHECK(via_json.indices == sp.indices);
  CHECK(via_json.weights == sp.weights);
  CHECK(via_json.m == sp.m);
  CHECK(via_json.sample_count == sp.sample_count);
  CHECK(via_json.nu_tilde == sp.nu_tilde);
  CHECK(via_json.s_min == sp.s_min);
  CHECK(via_json.s_max == sp.s_max);
  CHECK(via_json.epsilon == sp.epsilon);
  CHECK(via_json.seed == sp.seed);

  const std::string path = temp_path("sp.json");
  save_sparsifier(sp, path);
  Sparsifier from_file = load_sparsifier(path);
  CHECK(from_file.weights == sp.weights);
  CHECK(from_file.indices == sp.indices);
  std::filesystem::remove(path);

  const std::string text = temp_path("sp.txt");
  save_sparsifier_text(sp, text);
  std::istringstream lines(glms::testing::read_text(text));
  std::string line;
  std::int64_t count = 0;
  while (std::getline(lines, line))
    if (!line.empty()) ++count;
  CHECK(count == sp.nnz());
  std::filesystem::remove(text);

  nlohmann::json broken = sparsifier_to_json(sp);
  broken["weights"][0] = -1.0;
  CHECK_THROWS_AS(sparsifier_from_json(broken), std::runtime_error);
}

TEST_SUITE_END();
