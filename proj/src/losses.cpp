#include "glms/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <tuple>

namespace glms {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_p(double p) {
  if (!(p > 0.0 && p <= 2.0))
    throw std::invalid_argument("loss exponent p must be in (0, 2]");
}

double term_eval(const LossTerm& t, double x) {
  const double ax = std::fabs(x);
  double base = 0.0;
  switch (t.kind) {
    case LossKind::ell_p:
      base = std::pow(ax, t.p);
      break;
    case LossKind::gamma_p:
      base = ax <= 1.0 ? 0.5 * t.p * x * x : std::pow(ax, t.p) - (1.0 - 0.5 * t.p);
      break;
    case LossKind::quadratic:
      base = x * x;
      break;
    case LossKind::absolute:
      base = ax;
      break;
  }
  return t.scale * base + t.bump * x * x;
}

// f(sqrt(t))/t without the sqrt round trip where it cancels analytically.
double term_ratio(const LossTerm& t, double tt) {
  switch (t.kind) {
    case LossKind::ell_p:
      return t.scale * std::pow(tt, 0.5 * t.p - 1.0) + t.bump;
    case LossKind::gamma_p:
      if (tt <= 1.0) return t.scale * 0.5 * t.p + t.bump;
      return t.scale * (std::pow(tt, 0.5 * t.p) - (1.0 - 0.5 * t.p)) / tt + t.bump;
    case LossKind::quadratic:
      return t.scale + t.bump;
    case LossKind::absolute:
      return t.scale / std::sqrt(tt) + t.bump;
  }
  return 0.0;
}

double term_ratio_zero_limit(const LossTerm& t) {
  switch (t.kind) {
    case LossKind::ell_p:
      if (t.p == 2.0) return t.scale + t.bump;
      return t.scale > 0.0 ? kInf : t.bump;
    case LossKind::gamma_p:
      return t.scale * 0.5 * t.p + t.bump;
    case LossKind::quadratic:
      return t.scale + t.bump;
    case LossKind::absolute:
      return t.scale > 0.0 ? kInf : t.bump;
  }
  return 0.0;
}

std::optional<double> term_degree(const LossTerm& t) {
  switch (t.kind) {
    case LossKind::ell_p:
      if (t.bump > 0.0) return t.p == 2.0 ? std::optional<double>(2.0) : std::nullopt;
      return t.p;
    case LossKind::gamma_p:
      // gamma_2 is identically x^2, bump included.
      return t.p == 2.0 ? std::optional<double>(2.0) : std::nullopt;
    case LossKind::quadratic:
      return 2.0;
    case LossKind::absolute:
      return t.bump > 0.0 ? std::nullopt : std::optional<double>(1.0);
  }
  return std::nullopt;
}

// Certified constants for a single term; scale and a pure-power bump do not
// change them except L -> max{1, L} once a bump is present.
void term_constants(const LossTerm& t, double& L, double& theta, double& c) {
  switch (t.kind) {
    case LossKind::ell_p:
    case LossKind::gamma_p:
      L = 1.0;
      theta = 0.5 * t.p;
      c = 1.0;
      break;
    case LossKind::quadratic:
      L = 1.0;
      theta = 1.0;
      c = 1.0;
      break;
    case LossKind::absolute:
      L = 1.0;
      theta = 0.5;
      c = 1.0;
      break;
  }
  if (t.bump > 0.0) L = std::max(1.0, L);
}

}  // namespace

std::string_view loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::ell_p: return "ell_p";
    case LossKind::gamma_p: return "gamma_p";
    case LossKind::quadratic: return "quadratic";
    case LossKind::absolute: return "absolute";
  }
  return "unknown";
}

void LossFamily::certify() {
  if (terms_.empty()) throw std::invalid_argument("LossFamily: no terms");
  double L = 0.0, theta = kInf, c = kInf;
  for (const LossTerm& t : terms_) {
    if (t.kind == LossKind::ell_p || t.kind == LossKind::gamma_p) check_p(t.p);
    if (!(t.scale >= 0.0) || !std::isfinite(t.scale))
      throw std::invalid_argument("LossFamily: term scale must be finite and >= 0");
    if (!(t.bump >= 0.0) || !std::isfinite(t.bump))
      throw std::invalid_argument("LossFamily: term bump must be finite and >= 0");
    double tl = 1.0, tt = 1.0, tc = 1.0;
    term_constants(t, tl, tt, tc);
    L = std::max(L, tl);
    theta = std::min(theta, tt);
    c = std::min(c, tc);
  }
  L_ = L;
  theta_ = theta;
  c_ = c;
}

LossFamily LossFamily::ell_p(std::int64_t m, double p) {
  check_p(p);
  LossFamily f;
  f.m_ = m;
  f.uniform_ = true;
  f.terms_ = {LossTerm{LossKind::ell_p, p, 1.0, 0.0}};
  f.certify();
  return f;
}

LossFamily LossFamily::gamma_p(std::int64_t m, double p) {
  check_p(p);
  LossFamily f;
  f.m_ = m;
  f.uniform_ = true;
  f.terms_ = {LossTerm{LossKind::gamma_p, p, 1.0, 0.0}};
  f.certify();
  return f;
}

LossFamily LossFamily::quadratic(std::int64_t m) {
  LossFamily f;
  f.m_ = m;
  f.uniform_ = true;
  f.terms_ = {LossTerm{LossKind::quadratic, 2.0, 1.0, 0.0}};
  f.certify();
  return f;
}

LossFamily LossFamily::absolute(std::int64_t m, double scale) {
  LossFamily f;
  f.m_ = m;
  f.uniform_ = true;
  f.terms_ = {LossTerm{LossKind::absolute, 1.0, scale, 0.0}};
  f.certify();
  return f;
}

LossFamily LossFamily::mixed(std::vector<LossTerm> terms) {
  LossFamily f;
  f.m_ = static_cast<std::int64_t>(terms.size());
  f.uniform_ = false;
  f.terms_ = std::move(terms);
  f.certify();
  return f;
}

const LossTerm& LossFamily::term(std::int64_t i) const {
  if (i < 0 || i >= m_) throw std::out_of_range("LossFamily: index out of range");
  return uniform_ ? terms_[0] : terms_[static_cast<std::size_t>(i)];
}

std::optional<double> LossFamily::homogeneous_degree() const {
  std::optional<double> deg;
  for (const LossTerm& t : terms_) {
    auto d = term_degree(t);
    if (!d) return std::nullopt;
    if (deg && *deg != *d) return std::nullopt;
    deg = d;
  }
  return deg;
}

double LossFamily::eval(std::int64_t i, double x) const { return term_eval(term(i), x); }

double LossFamily::sqrt_eval(std::int64_t i, double x) const {
  return std::sqrt(term_eval(term(i), x));
}

double LossFamily::ratio(std::int64_t i, double t) const {
  if (!(t > 0.0)) throw std::invalid_argument("LossFamily::ratio: t must be > 0");
  return term_ratio(term(i), t);
}

double LossFamily::ratio_zero_limit(std::int64_t i) const {
  return term_ratio_zero_limit(term(i));
}

LossFamily LossFamily::with_declared(double L, double theta, double c) const {
  LossFamily f = *this;
  f.L_ = L;
  f.theta_ = theta;
  f.c_ = c;
  return f;
}

PropernessReport verify_properness(const LossFamily& family, int grid_size,
                                   double lambda_max) {
  if (grid_size < 10) throw std::invalid_argument("verify_properness: grid_size >= 10");
  if (!(lambda_max > 1.0))
    throw std::invalid_argument("verify_properness: lambda_max must be > 1");

  PropernessReport rep;
  constexpr std::size_t kMaxViolations = 32;
  const double L = family.auto_lipschitz();
  const double theta = family.homogeneity_exponent();
  const double c = family.homogeneity_constant();

  // Log-spaced magnitudes in [1/lambda_max, lambda_max], signed, plus zero.
  std::vector<double> grid;
  grid.push_back(0.0);
  for (int k = 0; k < grid_size; ++k) {
    double t = static_cast<double>(k) / (grid_size - 1);  // 0..1
    double mag = std::exp(std::log(1.0 / lambda_max) +
                          t * (std::log(lambda_max) - std::log(1.0 / lambda_max)));
    grid.push_back(mag);
    grid.push_back(-mag);
  }
  std::vector<double> lambdas;
  for (int k = 0; k < grid_size; ++k) {
    double t = static_cast<double>(k) / (grid_size - 1);
    lambdas.push_back(std::exp(t * std::log(lambda_max)));  // [1, lambda_max]
  }

  // Distinct terms only; identical losses would re-run identical checks.
  std::set<std::tuple<int, double, double, double>> seen;
  for (std::int64_t i = 0; i < family.size(); ++i) {
    const LossTerm& t = family.term(i);
    if (!seen.insert({static_cast<int>(t.kind), t.p, t.scale, t.bump}).second) continue;
    ++rep.distinct_terms_checked;
    auto h = [&](double x) { return family.sqrt_eval(i, x); };
    auto slack = [](double rhs) { return 1e-9 * std::max(1.0, std::fabs(rhs)); };
    for (double x : grid) {
      double hx = h(x);
      for (double xp : grid) {
        double lhs = std::fabs(hx - h(xp));
        double rhs = L * h(x - xp);
        ++rep.checks_performed;
        if (lhs > rhs + slack(rhs) && rep.violations.size() < kMaxViolations)
          rep.violations.push_back({i, "auto-lipschitz", x, xp, 0.0, lhs, rhs});
      }
      for (double lam : lambdas) {
        double lhs = h(lam * x);
        double rhs = c * std::pow(lam, theta) * hx;
        ++rep.checks_performed;
        if (lhs < rhs - slack(rhs) && rep.violations.size() < kMaxViolations)
          rep.violations.push_back({i, "homogeneity", x, 0.0, lam, lhs, rhs});
      }
    }
  }
  rep.pass = rep.violations.empty();
  return rep;
}

AnchorResult find_anchor(const LossFamily& family, std::int64_t i, double s_min,
                         double s_max) {
  if (!(0.0 < s_min && s_min < s_max))
    throw std::invalid_argument("find_anchor: need 0 < s_min < s_max");

  std::int64_t evals = 0;
  auto F = [&](double x) {
    ++evals;
    return family.eval(i, x);
  };
  auto in_range = [&](double v) { return s_min <= v && v <= s_max; };

  const double f1 = F(1.0);
  if (!(f1 > 0.0) || !std::isfinite(f1))
    throw std::runtime_error("find_anchor: f(1) is not positive and finite");
  const double budget_d =
      static_cast<double>(kAnchorBudgetK) *
      (1.0 + std::log2(s_max / s_min) + std::fabs(std::log2(f1)));
  const std::int64_t budget = static_cast<std::int64_t>(std::ceil(budget_d));

  if (in_range(f1)) return {1.0, evals};

  // Exponential phase: establish a bracket [a, b] with f(a) < s_min and
  // f(b) > s_max (or hit the range on the way).
  double a = 0.0, b = 0.0;
  if (f1 < s_min) {
    a = 1.0;
    double x = 2.0;
    while (true) {
      if (evals >= budget)
        throw std::runtime_error("find_anchor: evaluation budget exhausted (growth)");
      double fx = F(x);
      if (in_range(fx)) return {x, evals};
      if (fx > s_max) {
        b = x;
        break;
      }
      a = x;
      x *= 2.0;
      if (x > 1e300) throw std::runtime_error("find_anchor: argument overflow");
    }
  } else {
    b = 1.0;
    double x = 0.5;
    while (true) {
      if (evals >= budget)
        throw std::runtime_error("find_anchor: evaluation budget exhausted (shrink)");
      double fx = F(x);
      if (in_range(fx)) return {x, evals};
      if (fx < s_min) {
        a = x;
        break;
      }
      b = x;
      x *= 0.5;
      if (x < 1e-300) throw std::runtime_error("find_anchor: argument underflow");
    }
  }

  // Bisection. Stopping rule from the h = sqrt(f) analysis: once the bracket
  // half-length delta satisfies L*h(delta) <= sqrt(s_max) - sqrt(s_min), the
  // midpoint must land in range for a genuinely proper loss.
  const double gap = std::sqrt(s_max) - std::sqrt(s_min);
  const double L = family.auto_lipschitz();
  while (evals < budget) {
    const double delta = 0.5 * (b - a);
    const bool guaranteed = L * family.sqrt_eval(i, delta) <= gap;
    ++evals;  // the h(delta) probe is an f evaluation
    const double mid = a + delta;
    const double fm = F(mid);
    if (in_range(fm)) return {mid, evals};
    if (guaranteed)
      throw std::runtime_error(
          "find_anchor: midpoint guarantee failed; family is not proper at the "
          "declared constants");
    if (fm < s_min)
      a = mid;
    else
      b = mid;
  }
  throw std::runtime_error("find_anchor: evaluation budget exhausted (bisection)");
}

LossFamily make_modified(const LossFamily& family, double s_max,
                         const Eigen::VectorXd& w0) {
  if (w0.size() != family.size())
    throw std::invalid_argument("make_modified: w0 length mismatch");
  if (!(s_max > 0.0)) throw std::invalid_argument("make_modified: s_max must be > 0");
  std::vector<LossTerm> terms(static_cast<std::size_t>(family.size()));
  for (std::int64_t i = 0; i < family.size(); ++i) {
    if (!(w0[i] >= 0.0))
      throw std::invalid_argument("make_modified: negative w0 entry at " +
                                  std::to_string(i));
    LossTerm t = family.term(i);
    t.bump += s_max * w0[i];
    terms[static_cast<std::size_t>(i)] = t;
  }
  LossFamily out;
  out.m_ = family.size();
  out.uniform_ = false;
  out.terms_ = std::move(terms);
  out.certify();
  // Thm-style constants: theta and c carry over, L becomes max{1, L}.
  out.L_ = std::max(1.0, family.auto_lipschitz());
  out.theta_ = family.homogeneity_exponent();
  out.c_ = family.homogeneity_constant();
  return out;
}

}  // namespace glms
