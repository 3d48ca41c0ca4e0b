#include "glms/matrix_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "glms/rng.hpp"

namespace glms {

namespace {

[[noreturn]] void fail(const std::string& path, std::int64_t line,
                       const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

// Locale-independent double parse of a whole token.
bool parse_double(std::string_view tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  // std::from_chars rejects a leading '+'; Matrix Market files use it.
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out, std::chars_format::general);
  return ec == std::errc() && ptr == last;
}

bool parse_int(std::string_view tok, std::int64_t& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

RowMatrix RowMatrix::from_rows(std::int64_t m, std::int64_t n,
                               std::vector<std::vector<RowEntry>> rows) {
  if (m < 0 || n < 0) throw std::invalid_argument("RowMatrix: negative dimension");
  if (static_cast<std::int64_t>(rows.size()) != m)
    throw std::invalid_argument("RowMatrix: row count mismatch");
  RowMatrix a;
  a.m_ = m;
  a.n_ = n;
  a.offsets_.assign(static_cast<std::size_t>(m) + 1, 0);
  std::int64_t total = 0;
  for (auto& r : rows) total += static_cast<std::int64_t>(r.size());
  a.entries_.reserve(static_cast<std::size_t>(total));
  for (std::int64_t i = 0; i < m; ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    std::sort(r.begin(), r.end(),
              [](const RowEntry& x, const RowEntry& y) { return x.col < y.col; });
    std::int64_t prev = -1;
    for (const RowEntry& e : r) {
      if (e.col < 0 || e.col >= n)
        throw std::invalid_argument("RowMatrix: column index out of range in row " +
                                    std::to_string(i));
      if (e.col == prev)
        throw std::invalid_argument("RowMatrix: duplicate column in row " +
                                    std::to_string(i));
      if (!std::isfinite(e.value))
        throw std::invalid_argument("RowMatrix: non-finite value in row " +
                                    std::to_string(i));
      prev = e.col;
      if (e.value != 0.0) a.entries_.push_back(e);
    }
    a.offsets_[static_cast<std::size_t>(i) + 1] =
        static_cast<std::int64_t>(a.entries_.size());
  }
  for (std::int64_t i = 0; i < m; ++i)
    a.r_ = std::max(a.r_, a.offsets_[static_cast<std::size_t>(i) + 1] -
                              a.offsets_[static_cast<std::size_t>(i)]);
  return a;
}

RowMatrix RowMatrix::from_dense(const Eigen::MatrixXd& dense) {
  std::vector<std::vector<RowEntry>> rows(static_cast<std::size_t>(dense.rows()));
  for (Eigen::Index i = 0; i < dense.rows(); ++i)
    for (Eigen::Index j = 0; j < dense.cols(); ++j)
      if (dense(i, j) != 0.0)
        rows[static_cast<std::size_t>(i)].push_back({j, dense(i, j)});
  return from_rows(dense.rows(), dense.cols(), std::move(rows));
}

std::span<const RowEntry> RowMatrix::row(std::int64_t i) const {
  if (i < 0 || i >= m_) throw std::out_of_range("RowMatrix::row: index out of range");
  auto lo = static_cast<std::size_t>(offsets_[static_cast<std::size_t>(i)]);
  auto hi = static_cast<std::size_t>(offsets_[static_cast<std::size_t>(i) + 1]);
  return {entries_.data() + lo, hi - lo};
}

std::int64_t RowMatrix::row_nnz(std::int64_t i) const {
  if (i < 0 || i >= m_) throw std::out_of_range("RowMatrix::row_nnz: index out of range");
  return offsets_[static_cast<std::size_t>(i) + 1] - offsets_[static_cast<std::size_t>(i)];
}

double RowMatrix::coeff(std::int64_t i, std::int64_t j) const {
  if (j < 0 || j >= n_) throw std::out_of_range("RowMatrix::coeff: column out of range");
  auto r = row(i);
  auto it = std::lower_bound(r.begin(), r.end(), j,
                             [](const RowEntry& e, std::int64_t c) { return e.col < c; });
  if (it != r.end() && it->col == j) return it->value;
  return 0.0;
}

double RowMatrix::row_dot(std::int64_t i, const Eigen::VectorXd& x) const {
  if (x.size() != n_) throw std::invalid_argument("RowMatrix::row_dot: size mismatch");
  double acc = 0.0;
  for (const RowEntry& e : row(i)) acc += e.value * x[e.col];
  return acc;
}

double RowMatrix::row_squared_norm(std::int64_t i) const {
  double acc = 0.0;
  for (const RowEntry& e : row(i)) acc += e.value * e.value;
  return acc;
}

Eigen::MatrixXd RowMatrix::to_dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m_, n_);
  for (std::int64_t i = 0; i < m_; ++i)
    for (const RowEntry& e : row(i)) d(i, e.col) = e.value;
  return d;
}

MatrixFormat format_from_path(const std::string& path) {
  auto ext = lower(std::filesystem::path(path).extension().string());
  if (ext == ".mtx" || ext == ".mm") return MatrixFormat::matrix_market;
  if (ext == ".csv") return MatrixFormat::csv;
  throw std::runtime_error("cannot infer matrix format from extension of '" + path +
                           "' (expected .mtx or .csv)");
}

namespace {

RowMatrix load_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string linebuf;
  std::int64_t lineno = 0;

  if (!std::getline(in, linebuf)) fail(path, 1, "empty file");
  ++lineno;
  {
    auto toks = split_ws(linebuf);
    if (toks.size() < 5 || lower(toks[0]) != "%%matrixmarket" ||
        lower(toks[1]) != "matrix")
      fail(path, lineno, "missing MatrixMarket banner");
    if (lower(toks[2]) != "coordinate")
      fail(path, lineno, "unsupported storage '" + std::string(toks[2]) +
                             "' (only coordinate)");
    if (lower(toks[3]) != "real")
      fail(path, lineno,
           "unsupported field '" + std::string(toks[3]) + "' (only real)");
    if (lower(toks[4]) != "general")
      fail(path, lineno,
           "unsupported symmetry '" + std::string(toks[4]) + "' (only general)");
  }

  std::int64_t m = -1, n = -1, declared_nnz = -1;
  while (std::getline(in, linebuf)) {
    ++lineno;
    if (!linebuf.empty() && linebuf[0] == '%') continue;
    auto toks = split_ws(linebuf);
    if (toks.empty()) continue;
    if (toks.size() != 3 || !parse_int(toks[0], m) || !parse_int(toks[1], n) ||
        !parse_int(toks[2], declared_nnz))
      fail(path, lineno, "malformed size line");
    break;
  }
  if (m < 0 || n < 0 || declared_nnz < 0) fail(path, lineno, "missing size line");

  std::vector<std::vector<RowEntry>> rows(static_cast<std::size_t>(m));
  std::int64_t seen = 0;
  while (std::getline(in, linebuf)) {
    ++lineno;
    if (!linebuf.empty() && linebuf[0] == '%') continue;
    auto toks = split_ws(linebuf);
    if (toks.empty()) continue;
    std::int64_t i = 0, j = 0;
    double v = 0.0;
    if (toks.size() != 3 || !parse_int(toks[0], i) || !parse_int(toks[1], j) ||
        !parse_double(toks[2], v))
      fail(path, lineno, "malformed entry line");
    if (i < 1 || i > m || j < 1 || j > n)
      fail(path, lineno, "coordinate out of range");
    if (!std::isfinite(v)) fail(path, lineno, "non-finite entry");
    rows[static_cast<std::size_t>(i - 1)].push_back({j - 1, v});
    ++seen;
  }
  if (seen != declared_nnz)
    fail(path, lineno,
         "entry count " + std::to_string(seen) + " does not match declared " +
             std::to_string(declared_nnz));
  try {
    return RowMatrix::from_rows(m, n, std::move(rows));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

RowMatrix load_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string linebuf;
  std::int64_t lineno = 0;
  std::vector<std::vector<RowEntry>> rows;
  std::int64_t n = -1;
  while (std::getline(in, linebuf)) {
    ++lineno;
    if (linebuf.empty()) continue;
    std::vector<RowEntry> entries;
    std::int64_t col = 0;
    std::size_t pos = 0;
    while (true) {
      std::size_t comma = linebuf.find(',', pos);
      std::string_view tok(linebuf.data() + pos,
                           (comma == std::string::npos ? linebuf.size() : comma) - pos);
      // Trim surrounding whitespace.
      while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.front())))
        tok.remove_prefix(1);
      while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.back())))
        tok.remove_suffix(1);
      double v = 0.0;
      if (!parse_double(tok, v)) fail(path, lineno, "malformed number '" + std::string(tok) + "'");
      if (!std::isfinite(v)) fail(path, lineno, "non-finite entry");
      if (v != 0.0) entries.push_back({col, v});
      ++col;
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (n < 0) n = col;
    else if (col != n) fail(path, lineno, "ragged row (expected " + std::to_string(n) + " fields)");
    rows.push_back(std::move(entries));
  }
  if (n < 0) throw std::runtime_error(path + ": empty file");
  const std::int64_t m = static_cast<std::int64_t>(rows.size());
  return RowMatrix::from_rows(m, n, std::move(rows));
}

}  // namespace

RowMatrix load_matrix(const std::string& path, MatrixFormat format) {
  switch (format) {
    case MatrixFormat::matrix_market: return load_matrix_market(path);
    case MatrixFormat::csv: return load_csv_matrix(path);
  }
  throw std::logic_error("unreachable");
}

RowMatrix load_matrix(const std::string& path) {
  return load_matrix(path, format_from_path(path));
}

ResponseVector load_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<double> vals;
  std::string linebuf;
  std::int64_t lineno = 0;
  while (std::getline(in, linebuf)) {
    ++lineno;
    auto toks = split_ws(linebuf);
    if (toks.empty()) continue;
    if (toks.size() != 1) fail(path, lineno, "expected one value per line");
    double v = 0.0;
    if (!parse_double(toks[0], v)) fail(path, lineno, "malformed number");
    if (!std::isfinite(v)) fail(path, lineno, "non-finite entry");
    vals.push_back(v);
  }
  return Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                           static_cast<Eigen::Index>(vals.size()));
}

Eigen::MatrixXd load_dense_csv(const std::string& path) {
  return load_csv_matrix(path).to_dense();
}

void save_matrix_market(const RowMatrix& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << " " << a.cols() << " " << a.nnz() << "\n";
  char buf[64];
  for (std::int64_t i = 0; i < a.rows(); ++i) {
    for (const RowEntry& e : a.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", e.value);
      out << (i + 1) << " " << (e.col + 1) << " " << buf << "\n";
    }
  }
  if (!out) throw std::runtime_error("write failure on '" + path + "'");
}

RowMatrix augment_bias(const RowMatrix& a, const ResponseVector& b) {
  if (b.size() != a.rows())
    throw std::invalid_argument("augment_bias: response length " +
                                std::to_string(b.size()) + " != row count " +
                                std::to_string(a.rows()));
  std::vector<std::vector<RowEntry>> rows(static_cast<std::size_t>(a.rows()));
  for (std::int64_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    auto& dst = rows[static_cast<std::size_t>(i)];
    dst.assign(r.begin(), r.end());
    if (b[i] != 0.0) dst.push_back({a.cols(), b[i]});
  }
  return RowMatrix::from_rows(a.rows(), a.cols() + 1, std::move(rows));
}

}  // namespace glms
