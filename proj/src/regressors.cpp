#include "glms/regressors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "glms/rng.hpp"

namespace glms {

namespace {

constexpr double kIrlsResidualFloor = 1e-10;
constexpr int kReferenceIrlsCap = 10000;
constexpr int kInnerIrlsCap = 2000;
constexpr int kCdPassCap = 100000;
constexpr double kReferenceIrlsTol = 1e-10;
constexpr double kInnerIrlsTol = 1e-9;
constexpr double kKktTol = 1e-8;

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error(what); }

void check_responses(const RowMatrix& a, const Eigen::VectorXd& b, const char* who) {
  if (b.size() != a.rows())
    throw std::invalid_argument(std::string(who) + ": response length must match row count");
  if (!b.allFinite())
    throw std::invalid_argument(std::string(who) + ": responses must be finite");
}

// Rows of the sparsified objective in dense form: minimize
// sum_k mult_k * f_k(<a_k, x> - target_k) over the free variables.
struct WeightedRows {
  Eigen::MatrixXd a;
  Eigen::VectorXd target;
  Eigen::VectorXd mult;
  std::vector<LossTerm> terms;

  Eigen::Index count() const { return a.rows(); }

  double objective(const Eigen::VectorXd& x) const {
    double total = 0.0;
    const Eigen::VectorXd r = a * x - target;
    for (Eigen::Index k = 0; k < r.size(); ++k) {
      const LossTerm& t = terms[static_cast<std::size_t>(k)];
      const double ar = std::abs(r[k]);
      double base;
      switch (t.kind) {
        case LossKind::quadratic: base = ar * ar; break;
        case LossKind::absolute: base = ar; break;
        case LossKind::ell_p: base = std::pow(ar, t.p); break;
        case LossKind::gamma_p:
          base = ar <= 1.0 ? (t.p / 2.0) * ar * ar
                           : std::pow(ar, t.p) - (1.0 - t.p / 2.0);
          break;
        default: base = ar * ar; break;
      }
      total += mult[k] * (t.scale * base + t.bump * ar * ar);
    }
    return total;
  }
};

// Half-quadratic majorizer weight f'(r) / (2r), exact for quadratics; the
// residual is floored so weights stay finite.
double hq_weight(const LossTerm& t, double r) {
  const double ar = std::max(std::abs(r), kIrlsResidualFloor);
  double base;
  switch (t.kind) {
    case LossKind::quadratic: base = 1.0; break;
    case LossKind::absolute: base = 0.5 / ar; break;
    case LossKind::ell_p: base = (t.p / 2.0) * std::pow(ar, t.p - 2.0); break;
    case LossKind::gamma_p:
      base = ar <= 1.0 ? t.p / 2.0 : (t.p / 2.0) * std::pow(ar, t.p - 2.0);
      break;
    default: base = 1.0; break;
  }
  return t.scale * base + t.bump;
}

// Weighted least squares via column-pivoted QR (rank-safe).
Eigen::VectorXd wls_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& target,
                          const Eigen::VectorXd& w) {
  const Eigen::VectorXd s = w.array().max(0.0).sqrt();
  const Eigen::MatrixXd aw = s.asDiagonal() * a;
  const Eigen::VectorXd tw = s.asDiagonal() * target;
  return aw.colPivHouseholderQr().solve(tw);
}

struct InnerResult {
  Eigen::VectorXd x;
  std::vector<double> objectives;  // accepted value after each step
  int iterations = 0;
};

InnerResult wls_minimize(const WeightedRows& rows) {
  Eigen::VectorXd w(rows.count());
  for (Eigen::Index k = 0; k < rows.count(); ++k) {
    const LossTerm& t = rows.terms[static_cast<std::size_t>(k)];
    w[k] = rows.mult[k] * (t.scale + t.bump);
  }
  InnerResult res;
  res.x = wls_solve(rows.a, rows.target, w);
  res.objectives.push_back(rows.objective(res.x));
  res.iterations = 1;
  return res;
}

// Damped IRLS: each accepted step is verified nonincreasing, backtracking by
// halving toward the current point when the raw reweighted step overshoots.
InnerResult irls_minimize(const WeightedRows& rows, double tol, int max_iter) {
  InnerResult res;
  // Quadratic surrogate start.
  Eigen::VectorXd w0(rows.count());
  for (Eigen::Index k = 0; k < rows.count(); ++k)
    w0[k] = rows.mult[k] *
            (rows.terms[static_cast<std::size_t>(k)].scale +
             rows.terms[static_cast<std::size_t>(k)].bump);
  Eigen::VectorXd x = wls_solve(rows.a, rows.target, w0);
  double fx = rows.objective(x);
  res.objectives.push_back(fx);

  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd r = rows.a * x - rows.target;
    Eigen::VectorXd w(rows.count());
    for (Eigen::Index k = 0; k < rows.count(); ++k)
      w[k] = rows.mult[k] * hq_weight(rows.terms[static_cast<std::size_t>(k)], r[k]);
    Eigen::VectorXd cand = wls_solve(rows.a, rows.target, w);
    double fc = rows.objective(cand);
    int halvings = 0;
    while (fc > fx && halvings < 60) {
      cand = 0.5 * (cand + x);
      fc = rows.objective(cand);
      ++halvings;
    }
    ++res.iterations;
    if (fc > fx) {  // no descent direction left at this weighting
      res.objectives.push_back(fx);
      break;
    }
    const double drop = fx - fc;
    x = cand;
    fx = fc;
    res.objectives.push_back(fx);
    if (drop <= tol * std::max(1.0, fx)) {
      res.x = x;
      return res;
    }
  }
  if (res.iterations >= max_iter)
    fail("irls: iteration cap exceeded without meeting the tolerance");
  res.x = x;
  return res;
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// Cyclic proximal coordinate descent for
//   sum_k w_k (<a_k, x> - t_k)^2 + sum_j penalty_j |x_j|,
// run until the KKT stationarity violation drops below kkt_tol (relative to
// the gradient scale at zero). Throws when the pass cap is hit.
InnerResult lasso_cd(const Eigen::MatrixXd& a, const Eigen::VectorXd& target,
                     const Eigen::VectorXd& w, const Eigen::VectorXd& penalty,
                     double kkt_tol, int max_passes) {
  const Eigen::Index n = a.cols();
  const Eigen::Index rows = a.rows();
  Eigen::VectorXd col_sq(n);
  for (Eigen::Index j = 0; j < n; ++j)
    col_sq[j] = (w.array() * a.col(j).array().square()).sum();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = -target;  // residual a*x - target at x = 0

  const double grad_scale =
      std::max(1.0, 2.0 * ((a.transpose() * (w.asDiagonal() * target)).cwiseAbs().maxCoeff()));
  const double tol_eff = kkt_tol * grad_scale;

  InnerResult res;
  auto objective = [&]() {
    return (w.array() * r.array().square()).sum() + penalty.dot(x.cwiseAbs());
  };

  for (int pass = 0; pass < max_passes; ++pass) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (col_sq[j] <= 0.0) {
        x[j] = 0.0;
        continue;
      }
      double bj = 0.0;
      for (Eigen::Index k = 0; k < rows; ++k) bj += w[k] * a(k, j) * r[k];
      const double u = soft_threshold(x[j] - bj / col_sq[j], penalty[j] / (2.0 * col_sq[j]));
      if (u != x[j]) {
        r += (u - x[j]) * a.col(j);
        x[j] = u;
      }
    }
    ++res.iterations;
    res.objectives.push_back(objective());

    double viol = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      double g = 0.0;
      for (Eigen::Index k = 0; k < rows; ++k) g += w[k] * a(k, j) * r[k];
      g *= 2.0;
      double v;
      if (x[j] > 0.0)
        v = std::abs(g + penalty[j]);
      else if (x[j] < 0.0)
        v = std::abs(g - penalty[j]);
      else
        v = std::max(0.0, std::abs(g) - penalty[j]);
      viol = std::max(viol, v);
    }
    if (viol <= tol_eff) {
      res.x = x;
      return res;
    }
  }
  fail("lasso: coordinate-descent pass cap exceeded without reaching stationarity");
}

}  // namespace

std::string_view problem_kind_name(ProblemKind k) {
  switch (k) {
    case ProblemKind::linear: return "linear";
    case ProblemKind::multiple: return "multiple";
    case ProblemKind::ridge: return "ridge";
    case ProblemKind::lasso: return "lasso";
    case ProblemKind::ell_p: return "ell_p";
    case ProblemKind::gamma_p: return "gamma_p";
  }
  return "?";
}

RegressionProblem RegressionProblem::linear(RowMatrix a, Eigen::VectorXd b) {
  check_responses(a, b, "linear");
  RegressionProblem pr;
  pr.kind = ProblemKind::linear;
  pr.a = std::move(a);
  pr.b = std::move(b);
  return pr;
}

RegressionProblem RegressionProblem::multiple(RowMatrix a, Eigen::MatrixXd b) {
  if (b.rows() != a.rows())
    throw std::invalid_argument("multiple: response rows must match matrix rows");
  if (b.cols() < 1) throw std::invalid_argument("multiple: need at least one response column");
  if (!b.allFinite()) throw std::invalid_argument("multiple: responses must be finite");
  RegressionProblem pr;
  pr.kind = ProblemKind::multiple;
  pr.a = std::move(a);
  pr.b_multi = std::move(b);
  return pr;
}

RegressionProblem RegressionProblem::ridge(RowMatrix a, Eigen::VectorXd b, double lambda) {
  check_responses(a, b, "ridge");
  if (!(lambda > 0.0)) throw std::invalid_argument("ridge: lambda must be positive");
  RegressionProblem pr;
  pr.kind = ProblemKind::ridge;
  pr.a = std::move(a);
  pr.b = std::move(b);
  pr.lambda = lambda;
  return pr;
}

RegressionProblem RegressionProblem::lasso(RowMatrix a, Eigen::VectorXd b, double lambda) {
  check_responses(a, b, "lasso");
  if (!(lambda > 0.0)) throw std::invalid_argument("lasso: lambda must be positive");
  RegressionProblem pr;
  pr.kind = ProblemKind::lasso;
  pr.a = std::move(a);
  pr.b = std::move(b);
  pr.lambda = lambda;
  return pr;
}

RegressionProblem RegressionProblem::ell_p(RowMatrix a, Eigen::VectorXd b, double p) {
  check_responses(a, b, "ell_p");
  if (!(p > 0.0 && p <= 2.0)) throw std::invalid_argument("ell_p: p must lie in (0,2]");
  RegressionProblem pr;
  pr.kind = ProblemKind::ell_p;
  pr.a = std::move(a);
  pr.b = std::move(b);
  pr.p = p;
  return pr;
}

RegressionProblem RegressionProblem::gamma_p(RowMatrix a, Eigen::VectorXd b, double p) {
  check_responses(a, b, "gamma_p");
  if (!(p > 0.0 && p <= 2.0)) throw std::invalid_argument("gamma_p: p must lie in (0,2]");
  RegressionProblem pr;
  pr.kind = ProblemKind::gamma_p;
  pr.a = std::move(a);
  pr.b = std::move(b);
  pr.p = p;
  return pr;
}

std::int64_t RegressionProblem::free_dim() const {
  if (kind == ProblemKind::multiple) return a.cols() * b_multi.cols();
  return a.cols();
}

double problem_objective(const RegressionProblem& problem, const Eigen::VectorXd& x) {
  if (x.size() != problem.free_dim())
    throw std::invalid_argument("problem_objective: dimension mismatch");
  const RowMatrix& a = problem.a;
  const std::int64_t m = a.rows();
  const std::int64_t n = a.cols();
  double total = 0.0;
  switch (problem.kind) {
    case ProblemKind::multiple: {
      const Eigen::Index cols = problem.b_multi.cols();
      for (Eigen::Index k = 0; k < cols; ++k) {
        const Eigen::VectorXd xk = x.segment(k * n, n);
        for (std::int64_t i = 0; i < m; ++i) {
          const double r = a.row_dot(i, xk) - problem.b_multi(static_cast<Eigen::Index>(i), k);
          total += r * r;
        }
      }
      return total;
    }
    case ProblemKind::linear:
    case ProblemKind::ridge:
    case ProblemKind::lasso: {
      for (std::int64_t i = 0; i < m; ++i) {
        const double r = a.row_dot(i, x) - problem.b[static_cast<Eigen::Index>(i)];
        total += r * r;
      }
      if (problem.kind == ProblemKind::ridge) total += problem.lambda * x.squaredNorm();
      if (problem.kind == ProblemKind::lasso)
        total += problem.lambda * x.cwiseAbs().sum();
      return total;
    }
    case ProblemKind::ell_p: {
      for (std::int64_t i = 0; i < m; ++i) {
        const double r = a.row_dot(i, x) - problem.b[static_cast<Eigen::Index>(i)];
        total += std::pow(std::abs(r), problem.p);
      }
      return total;
    }
    case ProblemKind::gamma_p: {
      for (std::int64_t i = 0; i < m; ++i) {
        const double r = std::abs(a.row_dot(i, x) - problem.b[static_cast<Eigen::Index>(i)]);
        total += r <= 1.0 ? (problem.p / 2.0) * r * r
                          : std::pow(r, problem.p) - (1.0 - problem.p / 2.0);
      }
      return total;
    }
  }
  return total;
}

namespace {

std::vector<std::vector<RowEntry>> matrix_rows(const RowMatrix& a) {
  std::vector<std::vector<RowEntry>> rows(static_cast<std::size_t>(a.rows()));
  for (std::int64_t i = 0; i < a.rows(); ++i) {
    const auto span = a.row(i);
    rows[static_cast<std::size_t>(i)].assign(span.begin(), span.end());
  }
  return rows;
}

}  // namespace

EmbeddedProblem embed(const RegressionProblem& problem) {
  const RowMatrix& a = problem.a;
  const std::int64_t m = a.rows();
  const std::int64_t n = a.cols();

  switch (problem.kind) {
    case ProblemKind::linear: {
      const bool bias = !problem.b.isZero(0.0);
      RowMatrix emb = bias ? augment_bias(a, problem.b) : a;
      return EmbeddedProblem(std::move(emb), LossFamily::quadratic(m), bias, n, m);
    }
    case ProblemKind::ell_p: {
      const bool bias = !problem.b.isZero(0.0);
      RowMatrix emb = bias ? augment_bias(a, problem.b) : a;
      return EmbeddedProblem(std::move(emb), LossFamily::ell_p(m, problem.p), bias, n, m);
    }
    case ProblemKind::gamma_p: {
      const bool bias = !problem.b.isZero(0.0);
      RowMatrix emb = bias ? augment_bias(a, problem.b) : a;
      return EmbeddedProblem(std::move(emb), LossFamily::gamma_p(m, problem.p), bias, n, m);
    }
    case ProblemKind::ridge: {
      std::vector<std::vector<RowEntry>> rows = matrix_rows(a);
      rows.resize(static_cast<std::size_t>(m + n));
      const double root = std::sqrt(problem.lambda);
      for (std::int64_t j = 0; j < n; ++j)
        rows[static_cast<std::size_t>(m + j)] = {{j, root}};
      RowMatrix stacked = RowMatrix::from_rows(m + n, n, std::move(rows));
      Eigen::VectorXd b2 = Eigen::VectorXd::Zero(m + n);
      b2.head(m) = problem.b;
      const bool bias = !problem.b.isZero(0.0);
      RowMatrix emb = bias ? augment_bias(stacked, b2) : stacked;
      return EmbeddedProblem(std::move(emb), LossFamily::quadratic(m + n), bias, n, m);
    }
    case ProblemKind::lasso: {
      std::vector<std::vector<RowEntry>> rows = matrix_rows(a);
      rows.resize(static_cast<std::size_t>(m + n));
      for (std::int64_t j = 0; j < n; ++j)
        rows[static_cast<std::size_t>(m + j)] = {{j, 1.0}};
      RowMatrix stacked = RowMatrix::from_rows(m + n, n, std::move(rows));
      Eigen::VectorXd b2 = Eigen::VectorXd::Zero(m + n);
      b2.head(m) = problem.b;
      const bool bias = !problem.b.isZero(0.0);
      RowMatrix emb = bias ? augment_bias(stacked, b2) : stacked;
      std::vector<LossTerm> terms(static_cast<std::size_t>(m + n));
      for (std::int64_t i = 0; i < m; ++i)
        terms[static_cast<std::size_t>(i)] = LossTerm{LossKind::quadratic, 2.0, 1.0, 0.0};
      for (std::int64_t j = 0; j < n; ++j)
        terms[static_cast<std::size_t>(m + j)] =
            LossTerm{LossKind::absolute, 2.0, problem.lambda, 0.0};
      return EmbeddedProblem(std::move(emb), LossFamily::mixed(std::move(terms)), bias, n, m);
    }
    case ProblemKind::multiple: {
      const Eigen::Index cols = problem.b_multi.cols();
      const std::int64_t total = m * cols;
      std::vector<std::vector<RowEntry>> rows(static_cast<std::size_t>(total));
      const bool bias = !problem.b_multi.isZero(0.0);
      for (Eigen::Index k = 0; k < cols; ++k) {
        for (std::int64_t i = 0; i < m; ++i) {
          auto& dst = rows[static_cast<std::size_t>(k * m + i)];
          const auto src = a.row(i);
          dst.reserve(src.size() + 1);
          for (const RowEntry& e : src) dst.push_back({e.col + k * n, e.value});
          const double bv = problem.b_multi(static_cast<Eigen::Index>(i), k);
          if (bias && bv != 0.0) dst.push_back({n * cols, bv});
        }
      }
      RowMatrix emb = RowMatrix::from_rows(total, n * cols + (bias ? 1 : 0), std::move(rows));
      return EmbeddedProblem(std::move(emb), LossFamily::quadratic(total), bias, n * cols,
                             total);
    }
  }
  throw std::invalid_argument("embed: unknown problem kind");
}

Eigen::VectorXd embedded_point(const EmbeddedProblem& emb, const Eigen::VectorXd& x) {
  if (x.size() != emb.free_dim)
    throw std::invalid_argument("embedded_point: dimension mismatch");
  if (!emb.bias_column) return x;
  Eigen::VectorXd xp(emb.free_dim + 1);
  xp.head(emb.free_dim) = x;
  xp[emb.free_dim] = -1.0;
  return xp;
}

double embedded_objective(const EmbeddedProblem& emb, const Eigen::VectorXd& x) {
  return glm_objective(emb.a, emb.family, embedded_point(emb, x));
}

namespace {

// Dense view of the sampled rows: the bias column becomes the target.
WeightedRows gather_rows(const EmbeddedProblem& emb, const Sparsifier& sp,
                         Eigen::VectorXd* penalty) {
  if (penalty) *penalty = Eigen::VectorXd::Zero(emb.free_dim);
  std::vector<Eigen::Index> keep;
  keep.reserve(sp.indices.size());
  for (std::size_t k = 0; k < sp.indices.size(); ++k) {
    const std::int64_t idx = sp.indices[k];
    if (penalty && idx >= emb.data_rows) {
      // Regularizer row j contributes mult * scale * |x_j|.
      const auto span = emb.a.row(idx);
      const LossTerm& t = emb.family.term(idx);
      for (const RowEntry& e : span)
        if (e.col < emb.free_dim)
          (*penalty)[static_cast<Eigen::Index>(e.col)] +=
              sp.weights[k] * t.scale * std::abs(e.value);
      continue;
    }
    keep.push_back(static_cast<Eigen::Index>(k));
  }

  WeightedRows rows;
  rows.a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(keep.size()), emb.free_dim);
  rows.target = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(keep.size()));
  rows.mult = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(keep.size()));
  rows.terms.resize(keep.size());
  for (std::size_t out = 0; out < keep.size(); ++out) {
    const std::size_t k = static_cast<std::size_t>(keep[out]);
    const std::int64_t idx = sp.indices[k];
    for (const RowEntry& e : emb.a.row(idx)) {
      if (e.col == emb.free_dim)
        rows.target[static_cast<Eigen::Index>(out)] = e.value;
      else
        rows.a(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(e.col)) = e.value;
    }
    rows.mult[static_cast<Eigen::Index>(out)] = sp.weights[k];
    rows.terms[out] = emb.family.term(idx);
  }
  return rows;
}

// Deterministic uniform row subsample (without replacement) for the
// warm-start least squares that anchors the automatic range.
Eigen::VectorXd warm_start(const RegressionProblem& problem, std::uint64_t seed) {
  const RowMatrix& a = problem.a;
  const std::int64_t m = a.rows();
  const std::int64_t n = a.cols();
  const std::int64_t want = std::min<std::int64_t>(m, std::max<std::int64_t>(4 * n, 50));
  std::vector<std::int64_t> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(splitmix64(seed ^ 0x243f6a8885a308d3ULL));
  for (std::int64_t i = 0; i < want; ++i) {
    const std::int64_t j = i + rng.uniform_int(m - i);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }

  Eigen::MatrixXd sub(want, n);
  for (std::int64_t i = 0; i < want; ++i) {
    sub.row(static_cast<Eigen::Index>(i)).setZero();
    for (const RowEntry& e : a.row(order[static_cast<std::size_t>(i)]))
      sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e.col)) = e.value;
  }
  const auto svd = sub.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV);

  if (problem.kind == ProblemKind::multiple) {
    const Eigen::Index cols = problem.b_multi.cols();
    Eigen::VectorXd x(n * cols);
    for (Eigen::Index k = 0; k < cols; ++k) {
      Eigen::VectorXd bs(want);
      for (std::int64_t i = 0; i < want; ++i)
        bs[static_cast<Eigen::Index>(i)] =
            problem.b_multi(static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)]), k);
      x.segment(k * n, n) = svd.solve(bs);
    }
    return x;
  }
  Eigen::VectorXd bs(want);
  for (std::int64_t i = 0; i < want; ++i)
    bs[static_cast<Eigen::Index>(i)] =
        problem.b[static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)])];
  return svd.solve(bs);
}

}  // namespace

SolveReport solve(const RegressionProblem& problem, const SolveOptions& opts,
                  QueryLedger& ledger) {
  if (!(opts.epsilon > 0.0 && opts.epsilon < 1.0))
    throw std::invalid_argument("solve: epsilon must lie in (0,1)");

  SolveReport rep;
  const std::int64_t nf = problem.free_dim();

  // Degenerate instances: zero objective is attainable outright.
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(nf);
  const double f0 = problem_objective(problem, zero);
  if (f0 == 0.0) {
    rep.x = zero;
    rep.objective = 0.0;
    rep.short_circuit = true;
    rep.note = "zero responses; x = 0 is exact";
    return rep;
  }
  // Residuals at rounding-noise scale relative to F(0) are as solved as
  // double precision allows; pressing on would hand the sparsifier a
  // degenerate [s_min, s_max] window.
  const Eigen::VectorXd x_ls = warm_start(problem, opts.sparsify.seed);
  const double f_ls = problem_objective(problem, x_ls);
  if (f_ls <= 1e-20 * f0) {
    rep.x = x_ls;
    rep.objective = f_ls;
    rep.short_circuit = true;
    rep.note = "warm start interpolates up to rounding error";
    return rep;
  }

  EmbeddedProblem emb = embed(problem);
  const double m4 = std::pow(static_cast<double>(emb.a.rows()), 4.0);
  double s_max = opts.s_max.value_or(std::min(f0, 10.0 * f_ls));
  double s_min = opts.s_min.value_or(
      std::min(std::max(1e-12 * s_max, opts.epsilon * f_ls / m4), s_max / 4.0));
  rep.s_min = s_min;
  rep.s_max = s_max;

  rep.sparsifier = qglm_sparsify(emb.a, emb.family, opts.epsilon, s_min, s_max,
                                 opts.sparsify, ledger, &rep.trace);

  InnerResult inner;
  if (problem.kind == ProblemKind::lasso) {
    Eigen::VectorXd penalty;
    WeightedRows rows = gather_rows(emb, rep.sparsifier, &penalty);
    Eigen::VectorXd w(rows.count());
    for (Eigen::Index k = 0; k < rows.count(); ++k)
      w[k] = rows.mult[k] * (rows.terms[static_cast<std::size_t>(k)].scale +
                             rows.terms[static_cast<std::size_t>(k)].bump);
    inner = lasso_cd(rows.a, rows.target, w, penalty, kKktTol, kCdPassCap);
  } else {
    WeightedRows rows = gather_rows(emb, rep.sparsifier, nullptr);
    const bool quad = problem.kind == ProblemKind::linear ||
                      problem.kind == ProblemKind::ridge ||
                      problem.kind == ProblemKind::multiple ||
                      (problem.kind == ProblemKind::ell_p && problem.p == 2.0);
    inner = quad ? wls_minimize(rows) : irls_minimize(rows, kInnerIrlsTol, kInnerIrlsCap);
  }

  rep.x = inner.x;
  rep.objective = problem_objective(problem, rep.x);
  rep.sparsified_value =
      sparsified_objective(emb.a, emb.family, rep.sparsifier, embedded_point(emb, rep.x));
  rep.inner_iterations = inner.iterations;
  rep.inner_objectives = std::move(inner.objectives);

  if (opts.compute_reference) {
    const auto [xr, fr] = reference_solve(problem);
    rep.reference_objective = fr;
    rep.ratio = fr > 0.0 ? rep.objective / fr
                         : (rep.objective == 0.0 ? 1.0
                                                 : std::numeric_limits<double>::infinity());
  }
  return rep;
}

std::pair<Eigen::VectorXd, double> reference_solve(const RegressionProblem& problem) {
  const RowMatrix& a = problem.a;
  const Eigen::MatrixXd ad = a.to_dense();
  const std::int64_t n = a.cols();

  switch (problem.kind) {
    case ProblemKind::linear: {
      const Eigen::VectorXd x =
          ad.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(problem.b);
      return {x, problem_objective(problem, x)};
    }
    case ProblemKind::multiple: {
      const auto svd = ad.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Eigen::Index cols = problem.b_multi.cols();
      Eigen::VectorXd x(n * cols);
      for (Eigen::Index k = 0; k < cols; ++k)
        x.segment(k * n, n) = svd.solve(problem.b_multi.col(k));
      return {x, problem_objective(problem, x)};
    }
    case ProblemKind::ridge: {
      Eigen::MatrixXd gram = ad.transpose() * ad;
      gram.diagonal().array() += problem.lambda;
      const Eigen::VectorXd x = gram.ldlt().solve(ad.transpose() * problem.b);
      return {x, problem_objective(problem, x)};
    }
    case ProblemKind::lasso: {
      const Eigen::VectorXd w = Eigen::VectorXd::Ones(a.rows());
      const Eigen::VectorXd penalty = Eigen::VectorXd::Constant(n, problem.lambda);
      const InnerResult res = lasso_cd(ad, problem.b, w, penalty, kKktTol, kCdPassCap);
      return {res.x, problem_objective(problem, res.x)};
    }
    case ProblemKind::ell_p:
    case ProblemKind::gamma_p: {
      if (problem.kind == ProblemKind::ell_p && problem.p == 2.0) {
        const Eigen::VectorXd x =
            ad.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(problem.b);
        return {x, problem_objective(problem, x)};
      }
      WeightedRows rows;
      rows.a = ad;
      rows.target = problem.b;
      rows.mult = Eigen::VectorXd::Ones(a.rows());
      const LossKind kind =
          problem.kind == ProblemKind::ell_p ? LossKind::ell_p : LossKind::gamma_p;
      rows.terms.assign(static_cast<std::size_t>(a.rows()),
                        LossTerm{kind, problem.p, 1.0, 0.0});
      const InnerResult res = irls_minimize(rows, kReferenceIrlsTol, kReferenceIrlsCap);
      return {res.x, problem_objective(problem, res.x)};
    }
  }
  throw std::invalid_argument("reference_solve: unknown problem kind");
}

}  // namespace glms
