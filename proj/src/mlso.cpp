#include "glms/mlso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace glms {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_positive(const Eigen::VectorXd& w, const char* who) {
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (!(w[i] > 0.0) || !std::isfinite(w[i]))
      throw std::invalid_argument(std::string(who) +
                                  ": weights must be strictly positive and finite");
}

// Clamp-and-flag shared by both update routes. t is sigma_i / w_i.
double updated_weight(const LossFamily& family, std::int64_t i, double t,
                      double sigma, double s, std::vector<std::int64_t>* clamped) {
  auto flag = [&] {
    if (clamped) clamped->push_back(i);
  };
  if (!(sigma > kDegenerateLeverage) || !(t > 0.0)) {
    const double lim = family.ratio_zero_limit(i);
    if (std::isfinite(lim) && lim > 0.0) return lim / s;
    flag();
    return kWeightFloor;
  }
  double v = family.ratio(i, t) / s;
  if (!(v > kWeightFloor)) {
    flag();
    return kWeightFloor;
  }
  if (!(v < kWeightCeil)) {
    flag();
    return kWeightCeil;
  }
  return v;
}

}  // namespace

double metric_d(const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
  if (u.size() != w.size())
    throw std::invalid_argument("metric_d: length mismatch");
  double best = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (!(u[i] > 0.0) || !(w[i] > 0.0))
      throw std::invalid_argument("metric_d: nonpositive entry");
    best = std::max(best, std::fabs(std::log(u[i]) - std::log(w[i])));
  }
  return best;
}

Eigen::VectorXd update_phi(const RowMatrix& a, const LossFamily& family,
                           const Eigen::VectorXd& w, double s,
                           const LeverageEstimator* est,
                           std::vector<std::int64_t>* clamped) {
  if (!(s > 0.0) || !std::isfinite(s))
    throw std::invalid_argument("update_phi: s must be positive and finite");
  if (w.size() != a.rows() || family.size() != a.rows())
    throw std::invalid_argument("update_phi: size mismatch");
  check_positive(w, "update_phi");

  const std::int64_t m = a.rows();
  Eigen::VectorXd out(m);
  if (est) {
    if (est->size() != m || est->weights() != w)
      throw std::invalid_argument(
          "update_phi: estimator was not built on the given weights");
    for (std::int64_t i = 0; i < m; ++i) {
      const double t = est->ratio_query(i);
      est->charge_loss();  // one f_i evaluation per row
      out[i] = updated_weight(family, i, t, w[i] * t, s, clamped);
    }
  } else {
    Eigen::VectorXd sigma = exact_leverage(a, w);
    for (std::int64_t i = 0; i < m; ++i) {
      const double t = sigma[i] / w[i];
      out[i] = updated_weight(family, i, t, sigma[i], s, clamped);
    }
  }
  return out;
}

namespace {

// t_i via eigendecomposition of the (normalized) Gram matrix; the
// SVD-independent route used by the approximate-weight test.
Eigen::VectorXd quadratic_form_t(const RowMatrix& a, const Eigen::VectorXd& w) {
  const std::int64_t m = a.rows(), n = a.cols();
  const double wmax = w.maxCoeff();
  if (!(wmax > 0.0)) return Eigen::VectorXd::Zero(m);

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  for (std::int64_t i = 0; i < m; ++i) {
    const double wi = w[i] / wmax;
    if (wi == 0.0) continue;
    auto r = a.row(i);
    for (const RowEntry& e1 : r)
      for (const RowEntry& e2 : r) gram(e1.col, e2.col) += wi * e1.value * e2.value;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("approx_weight_gap: eigendecomposition failed");
  const auto& lam = eig.eigenvalues();
  const double lmax = lam.size() > 0 ? lam[lam.size() - 1] : 0.0;
  const double cutoff = 1e-18 * lmax;

  Eigen::VectorXd t(m);
  Eigen::VectorXd proj(n);
  for (std::int64_t i = 0; i < m; ++i) {
    proj.setZero();
    for (const RowEntry& e : a.row(i)) proj += e.value * eig.eigenvectors().row(e.col).transpose();
    double acc = 0.0;
    for (std::int64_t k = 0; k < n; ++k)
      if (lam[k] > cutoff) acc += proj[k] * proj[k] / lam[k];
    t[i] = acc / wmax;
  }
  return t;
}

}  // namespace

double approx_weight_gap(const RowMatrix& a, const LossFamily& family,
                         const Eigen::VectorXd& w, double s) {
  if (!(s > 0.0)) throw std::invalid_argument("approx_weight_gap: s must be > 0");
  if (w.size() != a.rows() || family.size() != a.rows())
    throw std::invalid_argument("approx_weight_gap: size mismatch");
  check_positive(w, "approx_weight_gap");

  const Eigen::VectorXd t = quadratic_form_t(a, w);
  const double log_s = std::log(s);
  double gap = 0.0;
  for (std::int64_t i = 0; i < a.rows(); ++i) {
    const double sigma = w[i] * t[i];
    if (!(sigma > kDegenerateLeverage) || !(t[i] > 0.0)) continue;
    // |ln( ratio(t)/w / s )|, assembled from logs to dodge overflow.
    const double lhs = std::log(family.ratio(i, t[i])) - std::log(w[i]) - log_s;
    gap = std::max(gap, std::fabs(lhs));
  }
  return gap;
}

bool is_approx_weight(const RowMatrix& a, const LossFamily& family,
                      const Eigen::VectorXd& w, double s, double alpha) {
  if (!(alpha >= 1.0)) throw std::invalid_argument("is_approx_weight: alpha >= 1");
  return approx_weight_gap(a, family, w, s) <= std::log(alpha) + 1e-12;
}

InitBundle weight_initialize(const RowMatrix& a, const LossFamily& family,
                             double s_max, double delta_init,
                             const NoiseConfig& noise, QueryLedger& ledger) {
  if (!(s_max > 0.0) || !std::isfinite(s_max))
    throw std::invalid_argument("weight_initialize: s_max must be positive");
  if (!(delta_init > 0.0))
    throw std::invalid_argument("weight_initialize: delta_init must be positive");
  if (family.size() != a.rows())
    throw std::invalid_argument("weight_initialize: family/matrix size mismatch");

  const std::int64_t m = a.rows();
  InitBundle bundle;
  bundle.delta_init = delta_init;
  bundle.s_max = s_max;

  // Step 1: anchors with f_i(t-hat_i) in [s_max/2, s_max].
  bundle.anchors.resize(m);
  for (std::int64_t i = 0; i < m; ++i) {
    AnchorResult r = find_anchor(family, i, 0.5 * s_max, s_max);
    bundle.anchors[i] = r.x;
    bundle.anchor_evals += r.evals;
  }
  ledger.charge(OracleKind::loss_eval,
                static_cast<std::uint64_t>(bundle.anchor_evals));

  // Step 2: half-accurate leverage at H = diag(anchor^-2), then
  // w0 = delta_init / sigma-tilde.
  Eigen::VectorXd h = bundle.anchors.array().square().inverse();
  LeverageEstimator est = mod_lev_approx(a, h, 0.5, noise, ledger, "init");
  bundle.w0.resize(m);
  for (std::int64_t i = 0; i < m; ++i) {
    const double st = est.query(i);
    if (st > kDegenerateLeverage) {
      bundle.w0[i] = delta_init / st;
    } else {
      // Zero rows contribute nothing at any scale; park them at 1.
      bundle.w0[i] = 1.0;
      bundle.clamped_rows.push_back(i);
    }
  }

  // Step 3: quadratic bump.
  bundle.modified = make_modified(family, s_max, bundle.w0);

  // Certify beta, doubling past the formula value if the data demands it.
  const double L = family.auto_lipschitz();
  const double theta = family.homogeneity_exponent();
  const double c = family.homogeneity_constant();
  bundle.c_init = 2.0 * std::pow(2.0 * L / c, 2.0 / theta);
  double beta =
      3.0 * std::pow(2.0 * L / c, 4.0 / theta) * static_cast<double>(m) / delta_init;
  const double gap = approx_weight_gap(a, bundle.modified, bundle.w0, s_max);
  int doublings = 0;
  while (gap > std::log(beta) + 1e-12 && doublings < 10) {
    beta *= 2.0;
    ++doublings;
  }
  if (gap > std::log(beta) + 1e-12)
    throw std::runtime_error(
        "weight_initialize: beta certification failed after 10 doublings "
        "(non-proper family or degenerate data)");
  bundle.beta = beta;
  bundle.beta_doublings = doublings;
  return bundle;
}

QmlsoResult qmlso(const RowMatrix& a, const LossFamily& family,
                  const Eigen::VectorXd& w0, std::int64_t j_min,
                  std::int64_t j_max, double beta, double epsilon,
                  const NoiseConfig& noise, QueryLedger& ledger) {
  if (j_min > j_max) throw std::invalid_argument("qmlso: j_min must be <= j_max");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("qmlso: epsilon must be in (0, 1)");
  if (!(beta >= 1.0)) throw std::invalid_argument("qmlso: beta must be >= 1");
  if (w0.size() != a.rows() || family.size() != a.rows())
    throw std::invalid_argument("qmlso: size mismatch");
  check_positive(w0, "qmlso");

  const double s_top = std::ldexp(1.0, static_cast<int>(j_max));
  {
    const double gap0 = approx_weight_gap(a, family, w0, s_top);
    if (gap0 > std::log(beta) + 1e-9)
      throw std::invalid_argument(
          "qmlso: w0 is not beta-approximate at scale 2^j_max (gap " +
          std::to_string(gap0) + " > ln beta " + std::to_string(std::log(beta)) + ")");
  }

  QmlsoResult res;
  const double L = family.auto_lipschitz();
  const double theta = family.homogeneity_exponent();
  const double c = family.homogeneity_constant();
  const double delta = std::max(0.5, std::fabs(theta - 2.0) / 2.0);
  const double big_c = std::max(2.0 * L / c, 1.0 / c);
  res.delta_contr = delta;
  res.contraction_c = big_c;

  // Round count: smallest T with delta^T * ln(beta) <= ln(X), where
  // X = (1-eps)/(1+eps)^2 * C is the contraction headroom.
  const double x = (1.0 - epsilon) / ((1.0 + epsilon) * (1.0 + epsilon)) * big_c;
  int t_rounds;
  if (beta <= 1.0) {
    t_rounds = 1;
    res.t_clamped = true;
  } else if (x <= 1.0) {
    t_rounds = 200;
    res.t_clamped = true;
  } else {
    const double raw = (std::log(std::log(x)) - std::log(std::log(beta))) /
                       std::log(delta);
    double t_ceil = std::ceil(raw);
    if (t_ceil < 1.0 || t_ceil > 200.0) res.t_clamped = true;
    t_rounds = static_cast<int>(std::min(200.0, std::max(1.0, t_ceil)));
  }
  res.rounds = t_rounds;

  const double noise_term =
      std::log(big_c) + std::log((1.0 + epsilon) / (1.0 - epsilon));

  // Contraction phase at the top scale.
  Eigen::VectorXd w = w0;
  for (int t = 0; t < t_rounds; ++t) {
    LeverageEstimator est = mod_lev_approx(a, w, epsilon, noise, ledger,
                                           "qmlso/itr/" + std::to_string(t));
    Eigen::VectorXd w_next =
        update_phi(a, family, w, s_top, &est, &res.clamped_rows);
    res.iterate_gap.push_back(metric_d(w, w_next));
    res.iterate_bound.push_back(std::pow(delta, t) * std::log(std::max(beta, 1.0)) +
                                noise_term / (1.0 - delta));
    w = std::move(w_next);
  }

  // Downward recursion; one estimator per scale, kept for aggregation and
  // certification.
  const std::int64_t scales = j_max - j_min + 1;
  std::vector<LeverageEstimator> ests;
  ests.reserve(static_cast<std::size_t>(scales));
  std::vector<Eigen::VectorXd> weights(static_cast<std::size_t>(scales));
  weights[static_cast<std::size_t>(j_max - j_min)] = w;
  ests.push_back(mod_lev_approx(a, w, epsilon, noise, ledger,
                                "qmlso/scale/" + std::to_string(j_max)));
  for (std::int64_t j = j_max - 1; j >= j_min; --j) {
    const LeverageEstimator& upper = ests.back();
    const Eigen::VectorXd& w_upper = weights[static_cast<std::size_t>(j - j_min + 1)];
    Eigen::VectorXd w_j = update_phi(a, family, w_upper,
                                     std::ldexp(1.0, static_cast<int>(j)), &upper,
                                     &res.clamped_rows);
    ests.push_back(mod_lev_approx(a, w_j, epsilon, noise, ledger,
                                  "qmlso/scale/" + std::to_string(j)));
    weights[static_cast<std::size_t>(j - j_min)] = std::move(w_j);
  }
  // ests[k] corresponds to scale j_max - k; flip to j-ascending order.
  std::reverse(ests.begin(), ests.end());

  // Aggregate z_i = 1/(1-eps) * sum_j sigma-tilde_i^(j) via counted queries.
  const std::int64_t m = a.rows();
  Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
  for (std::int64_t k = 0; k < scales; ++k)
    for (std::int64_t i = 0; i < m; ++i) z[i] += ests[static_cast<std::size_t>(k)].query(i);
  z /= (1.0 - epsilon);

  res.scheme.j_min = j_min;
  res.scheme.j_max = j_max;
  res.scheme.alpha = 4.0 * std::pow(big_c, 6.0 / (1.0 - delta));
  res.scheme.weights = std::move(weights);
  res.z.z = std::move(z);
  res.z.tau = res.z.z.lpNorm<1>();
  res.z.epsilon = epsilon;

  // Output invariants, asserted with exact scores.
  const double log_alpha = std::log(res.scheme.alpha) + 1e-9;
  for (std::int64_t j = j_min; j <= j_max; ++j) {
    const LeverageEstimator& est = ests[static_cast<std::size_t>(j - j_min)];
    const Eigen::VectorXd& w_j = res.scheme.at(j);
    const double s_j = std::ldexp(1.0, static_cast<int>(j));
    const double log_sj = std::log(s_j);
    double cond1 = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      const double t = est.exact_ratio(i);
      if (!(est.exact(i) > kDegenerateLeverage) || !(t > 0.0)) continue;
      const double dev =
          std::fabs(std::log(family.ratio(i, t)) - std::log(w_j[i]) - log_sj);
      cond1 = std::max(cond1, dev);
    }
    if (cond1 > log_alpha)
      throw std::runtime_error("qmlso: scheme condition 1 failed at scale j=" +
                               std::to_string(j));
    if (j < j_max) {
      const double cond2 = metric_d(res.scheme.at(j + 1), res.scheme.at(j));
      if (cond2 > log_alpha)
        throw std::runtime_error("qmlso: scheme condition 2 failed between j=" +
                                 std::to_string(j) + " and j+1");
    }
    for (std::int64_t i = 0; i < m; ++i)
      if (res.z.z[i] < est.exact(i) * (1.0 - 1e-12))
        throw std::runtime_error("qmlso: overestimate domination failed at row " +
                                 std::to_string(i));
  }
  const double tau_budget = (1.0 + epsilon) / (1.0 - epsilon) *
                            static_cast<double>(scales) *
                            static_cast<double>(a.cols());
  if (res.z.tau > tau_budget * (1.0 + 1e-12))
    throw std::runtime_error("qmlso: ||z||_1 exceeds the aggregation budget");

  return res;
}

}  // namespace glms
