#pragma once

// Query accounting and noise injection.
//
// Every pipeline stage draws its data through counted oracle views so the
// final report can state how many element / row / loss / weight /
// overestimate queries a run consumed. Noise models the multiplicative
// (1 +/- eps) slack of the approximate leverage estimates: factors are
// produced by a stateless hash of (seed, tag, index) so that repeated
// queries for the same quantity always agree and whole runs are
// bit-reproducible.

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>

#include "glms/matrix_io.hpp"

namespace glms {

enum class OracleKind : int {
  matrix_element = 0,
  matrix_index = 1,
  matrix_row = 2,
  loss_eval = 3,
  weight_eval = 4,
  overestimate_eval = 5,
};

inline constexpr int kOracleKinds = 6;
std::string_view oracle_kind_name(OracleKind k);

class QueryLedger {
 public:
  QueryLedger() { reset(); }

  void charge(OracleKind k, std::uint64_t n = 1) {
    counts_[static_cast<std::size_t>(k)].fetch_add(n, std::memory_order_relaxed);
  }
  std::uint64_t count(OracleKind k) const {
    return counts_[static_cast<std::size_t>(k)].load(std::memory_order_relaxed);
  }
  void reset() {
    for (auto& c : counts_) c.store(0, std::memory_order_relaxed);
  }
  std::map<std::string, std::uint64_t> snapshot() const;

 private:
  std::array<std::atomic<std::uint64_t>, kOracleKinds> counts_;
};

struct NoiseConfig {
  double epsilon = 0.1;
  std::uint64_t seed = 0;
  bool enabled = false;

  static NoiseConfig off() { return {0.0, 0, false}; }
  static NoiseConfig on(double epsilon, std::uint64_t seed) {
    return {epsilon, seed, true};
  }
  NoiseConfig with_epsilon(double eps) const { return {eps, seed, enabled}; }
};

// Multiplicative factor in [1-eps, 1+eps), constant for a given
// (config, tag, index); exactly 1 when disabled. Throws if epsilon is
// outside [0, 1).
double noisy_factor(const NoiseConfig& cfg, std::string_view tag, std::int64_t index);

// Counted view over a RowMatrix. Row queries charge one matrix_row plus one
// matrix_element per nonzero returned, matching the cost model in which a
// row readout touches each stored entry.
class MatrixOracle {
 public:
  MatrixOracle(const RowMatrix& a, QueryLedger& ledger) : a_(&a), ledger_(&ledger) {}

  std::int64_t rows() const { return a_->rows(); }
  std::int64_t cols() const { return a_->cols(); }

  double element(std::int64_t i, std::int64_t j) const {
    ledger_->charge(OracleKind::matrix_element);
    return a_->coeff(i, j);
  }
  // Column index of the k-th stored nonzero of row i (0-based k).
  std::int64_t index(std::int64_t i, std::int64_t k) const;
  std::span<const RowEntry> row(std::int64_t i) const {
    auto r = a_->row(i);
    ledger_->charge(OracleKind::matrix_row);
    ledger_->charge(OracleKind::matrix_element, static_cast<std::uint64_t>(r.size()));
    return r;
  }

  const RowMatrix& matrix() const { return *a_; }
  QueryLedger& ledger() const { return *ledger_; }

 private:
  const RowMatrix* a_;
  QueryLedger* ledger_;
};

// Cost model for the quantum implementation this pipeline simulates,
// reported up to polylog factors. All inputs are real-valued so the CLI can
// take scientific notation; preconditions: m >= n >= 1, r >= 1, eps in
// (0, 1], scale_ratio >= 1.
struct BudgetReport {
  double scale_factor = 0;          // log2(scale_ratio) + 1 scales
  double leverage_term = 0;         // r * sqrt(m n) / eps * scale_factor
  double matrix_exponent_term = 0;  // n^3 * scale_factor
  double row_sparsity_term = 0;     // n * r^2 * scale_factor
  double quantum_total = 0;         // sum of the three terms above
  double classical_comparison = 0;  // m * r
  std::string note;                 // "up to polylog factors"
};

BudgetReport quantum_budget(double m, double n, double r, double eps,
                            double scale_ratio);

}  // namespace glms
