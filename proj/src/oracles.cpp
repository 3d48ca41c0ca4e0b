#include "glms/oracles.hpp"

#include <cmath>
#include <stdexcept>

#include "glms/rng.hpp"

namespace glms {

std::string_view oracle_kind_name(OracleKind k) {
  switch (k) {
    case OracleKind::matrix_element: return "matrix-element";
    case OracleKind::matrix_index: return "matrix-index";
    case OracleKind::matrix_row: return "matrix-row";
    case OracleKind::loss_eval: return "loss-eval";
    case OracleKind::weight_eval: return "weight-eval";
    case OracleKind::overestimate_eval: return "overestimate-eval";
  }
  return "unknown";
}

std::map<std::string, std::uint64_t> QueryLedger::snapshot() const {
  std::map<std::string, std::uint64_t> out;
  for (int k = 0; k < kOracleKinds; ++k)
    out[std::string(oracle_kind_name(static_cast<OracleKind>(k)))] =
        count(static_cast<OracleKind>(k));
  return out;
}

double noisy_factor(const NoiseConfig& cfg, std::string_view tag, std::int64_t index) {
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon < 1.0))
    throw std::invalid_argument("noisy_factor: epsilon must be in [0, 1)");
  if (!cfg.enabled || cfg.epsilon == 0.0) return 1.0;
  std::uint64_t h = fnv1a(tag.data(), tag.size());
  h = splitmix64(cfg.seed ^ splitmix64(h) ^
                 splitmix64(static_cast<std::uint64_t>(index) + 0x9e3779b97f4a7c15ULL));
  double u = u64_to_unit(h);              // [0, 1)
  return 1.0 + cfg.epsilon * (2.0 * u - 1.0);  // [1-eps, 1+eps)
}

std::int64_t MatrixOracle::index(std::int64_t i, std::int64_t k) const {
  ledger_->charge(OracleKind::matrix_index);
  auto r = a_->row(i);
  if (k < 0 || k >= static_cast<std::int64_t>(r.size()))
    throw std::out_of_range("MatrixOracle::index: nonzero ordinal out of range");
  return r[static_cast<std::size_t>(k)].col;
}

BudgetReport quantum_budget(double m, double n, double r, double eps,
                            double scale_ratio) {
  if (!(m >= n && n >= r && r >= 1.0))
    throw std::invalid_argument("quantum_budget: need m >= n >= r >= 1");
  if (!(eps > 0.0 && eps <= 1.0))
    throw std::invalid_argument("quantum_budget: eps must be in (0, 1]");
  if (!(scale_ratio >= 1.0))
    throw std::invalid_argument("quantum_budget: scale_ratio must be >= 1");
  BudgetReport rep;
  rep.scale_factor = std::log2(scale_ratio) + 1.0;
  rep.leverage_term = r * std::sqrt(m * n) / eps * rep.scale_factor;
  rep.matrix_exponent_term = n * n * n * rep.scale_factor;
  rep.row_sparsity_term = n * r * r * rep.scale_factor;
  rep.quantum_total =
      rep.leverage_term + rep.matrix_exponent_term + rep.row_sparsity_term;
  rep.classical_comparison = m * r;
  rep.note = "up to polylog factors";
  return rep;
}

}  // namespace glms
