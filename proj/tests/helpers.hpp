#pragma once

// Shared fixtures for the test binaries: seeded random instances, the
// canonical loss families, a scale-range point placer, and temp-file
// plumbing.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "glms/losses.hpp"
#include "glms/matrix_io.hpp"
#include "glms/rng.hpp"

namespace glms::testing {

// Gaussian matrix with roughly `density` fraction of entries kept. Every
// row keeps at least one entry so no loss term is vacuous.
inline RowMatrix random_dense(Rng& rng, std::int64_t m, std::int64_t n,
                              double density = 1.0) {
  std::vector<std::vector<RowEntry>> rows(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) {
    auto& row = rows[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j < n; ++j) {
      if (density >= 1.0 || rng.uniform() < density)
        row.push_back({j, rng.normal()});
    }
    if (row.empty()) row.push_back({rng.uniform_int(n), rng.normal() + 2.0});
  }
  return RowMatrix::from_rows(m, n, std::move(rows));
}

inline Eigen::VectorXd log_uniform_positive(Rng& rng, std::int64_t m,
                                            double lo = 1e-3, double hi = 1e3) {
  Eigen::VectorXd w(m);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (std::int64_t i = 0; i < m; ++i) w[i] = std::exp(rng.uniform(llo, lhi));
  return w;
}

// The four family shapes most suites cycle through.
inline std::vector<std::pair<std::string, LossFamily>> canonical_families(
    std::int64_t m) {
  std::vector<std::pair<std::string, LossFamily>> out;
  out.emplace_back("ell_0.5", LossFamily::ell_p(m, 0.5));
  out.emplace_back("ell_1", LossFamily::ell_p(m, 1.0));
  out.emplace_back("ell_2", LossFamily::ell_p(m, 2.0));
  out.emplace_back("gamma_1", LossFamily::gamma_p(m, 1.0));
  return out;
}

inline double objective_at(const RowMatrix& a, const LossFamily& family,
                           const Eigen::VectorXd& x) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.rows(); ++i)
    acc += family.eval(i, a.row_dot(i, x));
  return acc;
}

// Rescales a random direction until the objective lands in [lo, hi]; the
// objective is monotone in the scaling for every shipped loss kind, so
// exponential bracketing plus bisection always terminates.
inline Eigen::VectorXd place_in_range(const RowMatrix& a, const LossFamily& family,
                                      Rng& rng, double lo, double hi) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    Eigen::VectorXd g(a.cols());
    for (std::int64_t j = 0; j < a.cols(); ++j) g[j] = rng.normal();
    const double norm = g.norm();
    if (!(norm > 0.0)) continue;
    g /= norm;

    double lam = 1.0;
    double f = objective_at(a, family, lam * g);
    if (!(f > 0.0)) continue;
    double lam_lo = lam, lam_hi = lam;
    int steps = 0;
    while (objective_at(a, family, lam_hi * g) < lo && steps++ < 2000) lam_hi *= 2.0;
    steps = 0;
    while (objective_at(a, family, lam_lo * g) > hi && steps++ < 2000) lam_lo *= 0.5;
    for (int it = 0; it < 400; ++it) {
      const double mid = 0.5 * (lam_lo + lam_hi);
      const double fm = objective_at(a, family, mid * g);
      if (fm >= lo && fm <= hi) return mid * g;
      if (fm < lo)
        lam_lo = mid;
      else
        lam_hi = mid;
    }
    const double flo = objective_at(a, family, lam_lo * g);
    if (flo >= lo && flo <= hi) return lam_lo * g;
    const double fhi = objective_at(a, family, lam_hi * g);
    if (fhi >= lo && fhi <= hi) return lam_hi * g;
  }
  throw std::runtime_error("place_in_range: could not land in the window");
}

inline std::string temp_path(const std::string& stem) {
  static std::uint64_t counter = 0;
  std::ostringstream name;
  name << "glms_test_" << splitmix64(reinterpret_cast<std::uintptr_t>(&counter))
       << "_" << counter++ << "_" << stem;
  return (std::filesystem::temp_directory_path() / name.str()).string();
}

inline void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
  if (!out) throw std::runtime_error("write_text failed: " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_text failed: " + path);
  std::ostringstream body;
  body << in.rdbuf();
  return body.str();
}

}  // namespace glms::testing
