#pragma once

// Proper scalar loss families.
//
// A family holds m losses f_i : R -> R_+ together with certified constants
// (L, theta, c) meaning: h_i = sqrt(f_i) satisfies the auto-Lipschitz bound
// |h_i(x) - h_i(x')| <= L * h_i(x - x') and the lower-homogeneity bound
// h_i(lambda * x) >= c * lambda^theta * h_i(x) for lambda >= 1.
//
// Shipped kinds: ell_p (|x|^p), gamma_p (quadratic core, |x|^p tail),
// quadratic, absolute; each term can carry a positive scale and a quadratic
// bump coefficient q (f(x) + q*x^2), which is how the modified family f* is
// represented. For ell_p / gamma_p with p in (0,2]: (L, theta, c) = (1, p/2, 1).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace glms {

enum class LossKind { ell_p, gamma_p, quadratic, absolute };

std::string_view loss_kind_name(LossKind k);

struct LossTerm {
  LossKind kind = LossKind::quadratic;
  double p = 2.0;      // exponent for ell_p / gamma_p; ignored otherwise
  double scale = 1.0;  // multiplies the base loss; > 0
  double bump = 0.0;   // adds bump * x^2; >= 0

  bool operator==(const LossTerm&) const = default;
};

class LossFamily {
 public:
  // Uniform families over m indices.
  static LossFamily ell_p(std::int64_t m, double p);
  static LossFamily gamma_p(std::int64_t m, double p);
  static LossFamily quadratic(std::int64_t m);
  static LossFamily absolute(std::int64_t m, double scale = 1.0);
  // Per-index terms; certified constants are L = max L_i, theta = min
  // theta_i, c = min c_i over the member kinds.
  static LossFamily mixed(std::vector<LossTerm> terms);

  std::int64_t size() const { return m_; }
  const LossTerm& term(std::int64_t i) const;
  bool uniform() const { return uniform_; }

  double auto_lipschitz() const { return L_; }       // L
  double homogeneity_exponent() const { return theta_; }  // theta
  double homogeneity_constant() const { return c_; }      // c

  // Exact degree when every f_i is a pure power of |x| of the same degree
  // (so the scale loop can collapse); nullopt otherwise.
  std::optional<double> homogeneous_degree() const;

  double eval(std::int64_t i, double x) const;       // f_i(x)
  double sqrt_eval(std::int64_t i, double x) const;  // h_i(x)

  // f_i(sqrt(t)) / t for t > 0 in closed form per kind; this is the quantity
  // the update map and the approximate-weight sandwich consume. Stable for
  // tiny and huge t (no sqrt round trip for the kinds where it cancels).
  double ratio(std::int64_t i, double t) const;
  // lim_{t -> 0+} of ratio(); +inf when divergent (ell_p with p < 2,
  // absolute).
  double ratio_zero_limit(std::int64_t i) const;

  // Test-only escape hatch: declare different constants (e.g. a wrong theta
  // for the properness falsifier). Does not touch the losses.
  LossFamily with_declared(double L, double theta, double c) const;

 private:
  LossFamily() = default;
  void certify();  // computes L_, theta_, c_ from terms

  std::int64_t m_ = 0;
  bool uniform_ = true;
  std::vector<LossTerm> terms_;  // size 1 when uniform_, else size m_
  double L_ = 1.0, theta_ = 1.0, c_ = 1.0;

  friend LossFamily make_modified(const LossFamily&, double, const Eigen::VectorXd&);
};

struct PropernessViolation {
  std::int64_t term_index = 0;
  std::string check;  // "auto-lipschitz" or "homogeneity"
  double x = 0, x_prime = 0, lambda = 0;
  double lhs = 0, rhs = 0;
};

struct PropernessReport {
  bool pass = true;
  std::vector<PropernessViolation> violations;  // capped
  std::int64_t distinct_terms_checked = 0;
  std::int64_t checks_performed = 0;
};

// Sampled falsifier for the declared (L, theta, c): log-spaced grids of
// x, x' in [-lambda_max, lambda_max] and lambda in [1, lambda_max], slack
// 1e-9 (relative above unit magnitude). Passing is necessary, not
// sufficient. grid_size >= 10 required.
PropernessReport verify_properness(const LossFamily& family, int grid_size,
                                   double lambda_max);

struct AnchorResult {
  double x = 0;          // s_min <= f_i(x) <= s_max
  std::int64_t evals = 0;  // f_i evaluations spent
};

// Exponential search from x = 1 followed by bisection; total f_i
// evaluations bounded by K*(1 + log2(s_max/s_min) + |log2 f_i(1)|) with
// K = 64. Throws std::runtime_error on budget exhaustion or f_i(1) <= 0
// (either signals a non-proper family).
AnchorResult find_anchor(const LossFamily& family, std::int64_t i, double s_min,
                         double s_max);

inline constexpr std::int64_t kAnchorBudgetK = 64;

// Per-index quadratic bump: f*_i(t) = f_i(t) + s_max * w0_i * t^2; declared
// constants become (max{1, L}, theta, c). Throws on negative w0 entries or
// length mismatch.
LossFamily make_modified(const LossFamily& family, double s_max,
                         const Eigen::VectorXd& w0);

}  // namespace glms
