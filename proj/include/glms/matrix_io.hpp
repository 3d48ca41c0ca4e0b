#pragma once

// Sparse row-major matrix container plus loaders/savers.
//
// Rows are stored as sorted (column, value) runs in a CSR-style layout.
// Loaders accept Matrix Market "coordinate real general" and dense CSV;
// explicit zeros are dropped on ingest so row nnz counts are exact.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace glms {

struct RowEntry {
  std::int64_t col = 0;
  double value = 0.0;
};

class RowMatrix {
 public:
  RowMatrix() = default;

  // rows[i] holds the nonzeros of row i in any column order; entries are
  // sorted internally. Throws std::invalid_argument on out-of-range columns,
  // duplicate columns within a row, or non-finite values. Zero values are
  // dropped.
  static RowMatrix from_rows(std::int64_t m, std::int64_t n,
                             std::vector<std::vector<RowEntry>> rows);

  static RowMatrix from_dense(const Eigen::MatrixXd& dense);

  std::int64_t rows() const { return m_; }
  std::int64_t cols() const { return n_; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(entries_.size()); }
  // Max row nnz, the sparsity parameter r.
  std::int64_t max_row_nnz() const { return r_; }

  std::span<const RowEntry> row(std::int64_t i) const;
  std::int64_t row_nnz(std::int64_t i) const;
  // Value at (i, j); binary search within the row.
  double coeff(std::int64_t i, std::int64_t j) const;
  double row_dot(std::int64_t i, const Eigen::VectorXd& x) const;
  double row_squared_norm(std::int64_t i) const;

  Eigen::MatrixXd to_dense() const;

  bool operator==(const RowMatrix& other) const = default;

 private:
  std::int64_t m_ = 0, n_ = 0, r_ = 0;
  std::vector<std::int64_t> offsets_;  // size m_+1
  std::vector<RowEntry> entries_;
};

// Response vector paired with a matrix; plain dense storage.
using ResponseVector = Eigen::VectorXd;

enum class MatrixFormat { matrix_market, csv };

// Guess the format from the file extension (.mtx -> matrix_market,
// .csv -> csv); throws on anything else.
MatrixFormat format_from_path(const std::string& path);

// Throws std::runtime_error with file/line context on malformed input:
// bad banner, wrong field/symmetry, out-of-range or duplicate coordinates,
// non-finite values, ragged CSV rows.
RowMatrix load_matrix(const std::string& path, MatrixFormat format);
RowMatrix load_matrix(const std::string& path);  // sniffs by extension

// One value per line (blank lines ignored); throws on non-finite entries.
ResponseVector load_vector(const std::string& path);

// Dense CSV with one row per line; used for multiple-regression responses.
Eigen::MatrixXd load_dense_csv(const std::string& path);

// Round-trips bit-exactly with load_matrix (17 significant digits).
void save_matrix_market(const RowMatrix& a, const std::string& path);

// Bias embedding: append one column holding b so that
// <(a_i, b_i), (x, -1)> = <a_i, x> - b_i. Only nonzero b_i are stored.
// Throws if b.size() != a.rows().
RowMatrix augment_bias(const RowMatrix& a, const ResponseVector& b);

}  // namespace glms
