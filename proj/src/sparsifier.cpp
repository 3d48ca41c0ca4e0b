#include "glms/sparsifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "glms/rng.hpp"

namespace glms {

namespace {

// Distinct stream labels so sampling and sum estimation never share raw
// uniforms even under the same run seed.
constexpr std::uint64_t kSampleStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kSumStream = 0xbf58476d1ce4e5b9ULL;

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error(what); }

}  // namespace

Eigen::VectorXd Sparsifier::to_dense() const {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  for (std::size_t k = 0; k < indices.size(); ++k)
    w[static_cast<Eigen::Index>(indices[k])] = weights[k];
  return w;
}

std::vector<std::int64_t> multi_sample(const OverestimateVector& z, std::int64_t m_draws,
                                       std::uint64_t seed, QueryLedger& ledger) {
  const Eigen::Index m = z.z.size();
  if (m_draws < 1) fail("multi_sample: draw count must be at least 1");
  if (m == 0) fail("multi_sample: empty overestimate vector");

  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double zi = z.z[i];
    if (!std::isfinite(zi) || zi < 0.0)
      fail("multi_sample: overestimate entries must be finite and nonnegative");
    total += zi;
  }
  if (total <= 0.0) fail("multi_sample: overestimate vector has no mass");
  // Building the table reads every entry once.
  ledger.charge(OracleKind::overestimate_eval, static_cast<std::uint64_t>(m));

  // Vose alias table. Stacks are filled in index order, so the layout -- and
  // with it every draw -- is a pure function of (z, seed).
  std::vector<double> prob(static_cast<std::size_t>(m));
  std::vector<Eigen::Index> alias(static_cast<std::size_t>(m));
  std::vector<double> scaled(static_cast<std::size_t>(m));
  std::vector<Eigen::Index> small, large;
  small.reserve(static_cast<std::size_t>(m));
  large.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    scaled[static_cast<std::size_t>(i)] = z.z[i] / total * static_cast<double>(m);
    (scaled[static_cast<std::size_t>(i)] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    const Eigen::Index s = small.back();
    small.pop_back();
    const Eigen::Index g = large.back();
    prob[static_cast<std::size_t>(s)] = scaled[static_cast<std::size_t>(s)];
    alias[static_cast<std::size_t>(s)] = g;
    scaled[static_cast<std::size_t>(g)] =
        scaled[static_cast<std::size_t>(g)] + scaled[static_cast<std::size_t>(s)] - 1.0;
    if (scaled[static_cast<std::size_t>(g)] < 1.0) {
      large.pop_back();
      small.push_back(g);
    }
  }
  for (Eigen::Index g : large) {
    prob[static_cast<std::size_t>(g)] = 1.0;
    alias[static_cast<std::size_t>(g)] = g;
  }
  for (Eigen::Index s : small) {  // numerical stragglers
    prob[static_cast<std::size_t>(s)] = 1.0;
    alias[static_cast<std::size_t>(s)] = s;
  }

  Rng rng(splitmix64(seed ^ kSampleStream));
  std::vector<std::int64_t> draws;
  draws.reserve(static_cast<std::size_t>(m_draws));
  for (std::int64_t k = 0; k < m_draws; ++k) {
    const double u = rng.uniform() * static_cast<double>(m);
    auto slot = static_cast<Eigen::Index>(u);
    if (slot >= m) slot = m - 1;
    const double frac = u - static_cast<double>(slot);
    const Eigen::Index pick =
        frac < prob[static_cast<std::size_t>(slot)] ? slot : alias[static_cast<std::size_t>(slot)];
    draws.push_back(static_cast<std::int64_t>(pick));
  }
  ledger.charge(OracleKind::overestimate_eval, static_cast<std::uint64_t>(m_draws));
  return draws;
}

double sum_estimate(const OverestimateVector& z, double epsilon_sum,
                    const NoiseConfig& noise, std::uint64_t seed,
                    QueryLedger& ledger) {
  if (!(epsilon_sum > 0.0 && epsilon_sum < 1.0))
    fail("sum_estimate: epsilon must lie in (0,1)");
  const Eigen::Index m = z.z.size();
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double zi = z.z[i];
    if (!std::isfinite(zi) || zi < 0.0)
      fail("sum_estimate: overestimate entries must be finite and nonnegative");
    total += zi;
  }
  ledger.charge(OracleKind::overestimate_eval, static_cast<std::uint64_t>(m));
  if (total == 0.0) return 0.0;
  const NoiseConfig band = noise.with_epsilon(epsilon_sum);
  return noisy_factor(band, "sum-estimate",
                      static_cast<std::int64_t>(splitmix64(seed ^ kSumStream) >> 1)) *
         total;
}

double glm_objective(const RowMatrix& a, const LossFamily& family,
                     const Eigen::VectorXd& x) {
  if (a.rows() != static_cast<std::int64_t>(family.size()))
    fail("glm_objective: family size does not match the matrix");
  if (x.size() != a.cols()) fail("glm_objective: dimension mismatch");
  double total = 0.0;
  for (std::int64_t i = 0; i < a.rows(); ++i) total += family.eval(i, a.row_dot(i, x));
  return total;
}

double sparsified_objective(const RowMatrix& a, const LossFamily& family,
                            const Sparsifier& sp, const Eigen::VectorXd& x) {
  if (sp.m != a.rows()) fail("sparsified_objective: sparsifier built for a different matrix");
  if (x.size() != a.cols()) fail("sparsified_objective: dimension mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < sp.indices.size(); ++k)
    total += sp.weights[k] * family.eval(sp.indices[k], a.row_dot(sp.indices[k], x));
  return total;
}

Sparsifier qglm_sparsify(const RowMatrix& a, const LossFamily& family,
                         double epsilon, double s_min, double s_max,
                         const SparsifyConfig& cfg, QueryLedger& ledger,
                         SparsifyTrace* trace) {
  const std::int64_t m = a.rows();
  if (m < 1) fail("qglm_sparsify: empty matrix");
  if (static_cast<std::int64_t>(family.size()) != m)
    fail("qglm_sparsify: family size does not match the matrix");
  if (!(epsilon > 0.0 && epsilon < 1.0)) fail("qglm_sparsify: epsilon must lie in (0,1)");
  if (!(s_min > 0.0) || !(s_max > s_min) || !std::isfinite(s_max))
    fail("qglm_sparsify: need 0 < s_min < s_max < inf");
  if (!(cfg.c_m > 0.0)) fail("qglm_sparsify: sample constant must be positive");

  SparsifyTrace local;
  SparsifyTrace& tr = trace ? *trace : local;
  tr = SparsifyTrace{};

  const double eps_eff = epsilon / 2.0;
  const double md = static_cast<double>(m);
  // The guarantee only has content once epsilon beats the effective rank.
  tr.epsilon_regime_warning =
      epsilon > 1.0 / static_cast<double>(std::max<std::int64_t>(a.cols(), 1));

  const std::int64_t j_max = static_cast<std::int64_t>(std::ceil(std::log2(s_max)));
  std::int64_t j_min =
      static_cast<std::int64_t>(std::floor(std::log2(s_min) - 4.0 * std::log2(md)));
  const bool fast_path = family.homogeneous_degree().has_value() && !cfg.force_full_scale_loop;
  if (fast_path) j_min = j_max;  // one scale pins every scale for homogeneous losses
  tr.homogeneous_fast_path = fast_path;
  tr.j_min = j_min;
  tr.j_max = j_max;

  const double delta_init = eps_eff * s_min / (8.0 * md * md * md * s_max);
  tr.delta_init = delta_init;

  InitBundle init = weight_initialize(a, family, s_max, delta_init, cfg.noise, ledger);
  tr.clamped_rows = init.clamped_rows;
  tr.beta_doublings = init.beta_doublings;

  // The driver starts at scale 2^j_max >= s_max, so re-certify beta there.
  const double s_top = std::ldexp(1.0, static_cast<int>(j_max));
  double beta = init.beta;
  {
    const double gap = approx_weight_gap(a, init.modified, init.w0, s_top);
    int extra = 0;
    while (gap > std::log(beta) + 1e-12 && extra < 10) {
      beta *= 2.0;
      ++extra;
    }
    if (gap > std::log(beta) + 1e-12)
      fail("qglm_sparsify: initial weights fail certification at the top scale");
    tr.beta_doublings += extra;
  }
  tr.beta = beta;

  QmlsoResult mlso = qmlso(a, init.modified, init.w0, j_min, j_max, beta, 0.1,
                           cfg.noise, ledger);
  tr.rounds = mlso.rounds;
  tr.t_clamped = mlso.t_clamped;
  tr.alpha = mlso.scheme.alpha;
  tr.tau = mlso.z.tau;
  for (std::int64_t i : mlso.clamped_rows)
    if (std::find(tr.clamped_rows.begin(), tr.clamped_rows.end(), i) == tr.clamped_rows.end())
      tr.clamped_rows.push_back(i);
  std::sort(tr.clamped_rows.begin(), tr.clamped_rows.end());

  std::int64_t sample_count;
  if (cfg.sample_override) {
    sample_count = *cfg.sample_override;
    if (sample_count < 1) fail("qglm_sparsify: sample override must be positive");
  } else {
    const double raw = cfg.c_m * mlso.z.tau *
                       std::log(static_cast<double>(std::max<std::int64_t>(m, 3))) /
                       (eps_eff * eps_eff);
    if (!std::isfinite(raw) || raw >= 9.0e18) fail("qglm_sparsify: sample count overflow");
    sample_count = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(raw)));
  }
  tr.sample_count = sample_count;

  const std::vector<std::int64_t> draws = multi_sample(mlso.z, sample_count, cfg.seed, ledger);
  const double nu_tilde = sum_estimate(mlso.z, 0.1, cfg.noise, cfg.seed, ledger);
  tr.nu_tilde = nu_tilde;

  std::map<std::int64_t, double> acc;
  const double denom = 1.1 * static_cast<double>(sample_count);
  for (std::int64_t idx : draws) {
    const double zi = mlso.z.z[static_cast<Eigen::Index>(idx)];
    if (!(zi > 0.0)) fail("qglm_sparsify: sampled a zero-mass row");
    acc[idx] += nu_tilde / (denom * zi);
  }

  Sparsifier sp;
  sp.m = m;
  sp.sample_count = sample_count;
  sp.nu_tilde = nu_tilde;
  sp.s_min = s_min;
  sp.s_max = s_max;
  sp.epsilon = epsilon;
  sp.seed = cfg.seed;
  sp.indices.reserve(acc.size());
  sp.weights.reserve(acc.size());
  for (const auto& [idx, w] : acc) {
    sp.indices.push_back(idx);
    sp.weights.push_back(w);
  }
  return sp;
}

namespace {

// Scales a direction so the objective lands inside [s_min, s_max]. Row dots
// are computed once; probes only re-evaluate the scalar losses.
struct RangePlacer {
  const RowMatrix& a;
  const LossFamily& family;
  double s_min, s_max;

  double value_at(const Eigen::VectorXd& dots, double lambda) const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < dots.size(); ++i)
      total += family.eval(static_cast<std::int64_t>(i), lambda * dots[i]);
    return total;
  }

  // Returns the accepted lambda, or nullopt when this direction cannot be
  // placed with the probe budget.
  std::optional<double> place(const Eigen::VectorXd& dots, double target) const {
    const double f1 = value_at(dots, 1.0);
    if (!std::isfinite(f1) || f1 <= 0.0) return std::nullopt;
    if (const auto deg = family.homogeneous_degree()) {
      const double lambda = std::pow(target / f1, 1.0 / *deg);
      if (!std::isfinite(lambda) || lambda <= 0.0) return std::nullopt;
      const double v = value_at(dots, lambda);
      if (v >= s_min && v <= s_max) return lambda;
      return std::nullopt;
    }
    // Monotone in lambda: bracket upward/downward, then bisect until a probe
    // lands inside the window.
    double lo = 0.0, hi = 1.0, f_hi = f1;
    int guard = 0;
    while (f_hi < s_min) {
      lo = hi;
      hi *= 2.0;
      f_hi = value_at(dots, hi);
      if (!std::isfinite(f_hi) || ++guard > 1100) return std::nullopt;
    }
    if (f_hi <= s_max) return hi;
    if (lo == 0.0) {
      // f(1) already above the window; shrink until a probe falls below.
      double probe = 0.5, f_probe = value_at(dots, probe);
      while (f_probe > s_max) {
        probe *= 0.5;
        f_probe = value_at(dots, probe);
        if (probe < 1e-300 || ++guard > 1100) return std::nullopt;
      }
      if (f_probe >= s_min) return probe;
      lo = probe;
      hi = 2.0 * probe;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double v = value_at(dots, mid);
      if (v >= s_min && v <= s_max) return mid;
      (v < s_min ? lo : hi) = mid;
    }
    return std::nullopt;
  }
};

}  // namespace

ValidationReport validate_sparsifier(const RowMatrix& a, const LossFamily& family,
                                     const Sparsifier& sp, std::int64_t num_points,
                                     std::uint64_t seed) {
  if (num_points < 1) fail("validate_sparsifier: need at least one point");
  if (sp.m != a.rows()) fail("validate_sparsifier: sparsifier built for a different matrix");
  if (static_cast<std::int64_t>(family.size()) != a.rows())
    fail("validate_sparsifier: family size does not match the matrix");
  if (!(sp.s_min > 0.0 && sp.s_max > sp.s_min))
    fail("validate_sparsifier: sparsifier carries an invalid range");

  const RangePlacer placer{a, family, sp.s_min, sp.s_max};
  Rng rng(splitmix64(seed));
  const Eigen::Index n = a.cols();
  const double ln_lo = std::log(sp.s_min), ln_hi = std::log(sp.s_max);

  ValidationReport rep;
  rep.epsilon = sp.epsilon;
  const std::int64_t attempt_budget = 200 * num_points;
  std::int64_t attempts = 0;

  while (rep.points < num_points) {
    if (attempts >= attempt_budget)
      fail("validate_sparsifier: could not place points inside the objective range");
    ++attempts;
    Eigen::VectorXd x(n);
    for (Eigen::Index j = 0; j < n; ++j) x[j] = rng.normal();
    Eigen::VectorXd dots(a.rows());
    for (std::int64_t i = 0; i < a.rows(); ++i)
      dots[static_cast<Eigen::Index>(i)] = a.row_dot(i, x);
    const double target = std::exp(rng.uniform(ln_lo, ln_hi));
    const auto lambda = placer.place(dots, target);
    if (!lambda) continue;

    double full = 0.0;
    for (Eigen::Index i = 0; i < dots.size(); ++i)
      full += family.eval(static_cast<std::int64_t>(i), *lambda * dots[i]);
    double sparse = 0.0;
    for (std::size_t k = 0; k < sp.indices.size(); ++k)
      sparse += sp.weights[k] *
                family.eval(sp.indices[k],
                            *lambda * dots[static_cast<Eigen::Index>(sp.indices[k])]);

    const double rel = std::abs(sparse - full) / full;
    rep.max_rel_error = std::max(rep.max_rel_error, rel);
    if (rel > sp.epsilon) ++rep.violations;
    ++rep.points;
  }
  rep.attempts = attempts;
  rep.violation_fraction =
      static_cast<double>(rep.violations) / static_cast<double>(rep.points);
  return rep;
}

nlohmann::json sparsifier_to_json(const Sparsifier& sp) {
  return nlohmann::json{{"m", sp.m},
                        {"indices", sp.indices},
                        {"weights", sp.weights},
                        {"M", sp.sample_count},
                        {"nu_tilde", sp.nu_tilde},
                        {"epsilon", sp.epsilon},
                        {"s_min", sp.s_min},
                        {"s_max", sp.s_max},
                        {"seed", sp.seed}};
}

Sparsifier sparsifier_from_json(const nlohmann::json& j) {
  Sparsifier sp;
  sp.m = j.at("m").get<std::int64_t>();
  sp.indices = j.at("indices").get<std::vector<std::int64_t>>();
  sp.weights = j.at("weights").get<std::vector<double>>();
  sp.sample_count = j.at("M").get<std::int64_t>();
  sp.nu_tilde = j.at("nu_tilde").get<double>();
  sp.epsilon = j.at("epsilon").get<double>();
  sp.s_min = j.at("s_min").get<double>();
  sp.s_max = j.at("s_max").get<double>();
  sp.seed = j.at("seed").get<std::uint64_t>();
  if (sp.indices.size() != sp.weights.size())
    fail("sparsifier_from_json: index/weight length mismatch");
  for (std::size_t k = 0; k < sp.indices.size(); ++k) {
    if (sp.indices[k] < 0 || sp.indices[k] >= sp.m)
      fail("sparsifier_from_json: index out of range");
    if (k > 0 && sp.indices[k] <= sp.indices[k - 1])
      fail("sparsifier_from_json: indices must be sorted and unique");
    if (!(sp.weights[k] > 0.0) || !std::isfinite(sp.weights[k]))
      fail("sparsifier_from_json: weights must be positive and finite");
  }
  return sp;
}

void save_sparsifier(const Sparsifier& sp, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("save_sparsifier: cannot open " + path);
  out << sparsifier_to_json(sp).dump(2) << '\n';
  if (!out) fail("save_sparsifier: write failed for " + path);
}

Sparsifier load_sparsifier(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("load_sparsifier: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("load_sparsifier: " + path + ": " + e.what());
  }
  return sparsifier_from_json(j);
}

void save_sparsifier_text(const Sparsifier& sp, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("save_sparsifier_text: cannot open " + path);
  char buf[64];
  for (std::size_t k = 0; k < sp.indices.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g", sp.weights[k]);
    out << sp.indices[k] << ' ' << buf << '\n';
  }
  if (!out) fail("save_sparsifier_text: write failed for " + path);
}

}  // namespace glms
