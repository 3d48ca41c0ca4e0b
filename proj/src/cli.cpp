#include "glms/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "glms/losses.hpp"
#include "glms/matrix_io.hpp"
#include "glms/oracles.hpp"
#include "glms/regressors.hpp"
#include "glms/rng.hpp"
#include "glms/sparsifier.hpp"
#include "glms/synth.hpp"

namespace glms {

namespace {

using nlohmann::json;

std::string iso_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string host_name() {
  char buf[256] = {0};
  if (gethostname(buf, sizeof(buf) - 1) != 0) return "unknown";
  return buf;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  char out[19];
  std::snprintf(out, sizeof(out), "0x%016llx",
                static_cast<unsigned long long>(fnv1a(bytes.data(), bytes.size())));
  return out;
}

json input_record(const std::string& path) {
  return json{{"path", path}, {"fnv1a", file_hash(path)}};
}

// Everything volatile lives under "meta" so reports from identical runs can
// be compared byte-for-byte after dropping that one key.
json assemble_report(const std::string& subcommand, const json& inputs, const json& config,
                     const QueryLedger& ledger, const json& result,
                     std::chrono::steady_clock::time_point started) {
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - started)
                           .count();
  json rep;
  rep["meta"] = {{"timestamp", iso_now()},
                 {"host", host_name()},
                 {"elapsed_ms", static_cast<std::int64_t>(elapsed)}};
  rep["subcommand"] = subcommand;
  rep["inputs"] = inputs;
  rep["config"] = config;
  rep["ledger"] = ledger.snapshot();
  rep["result"] = result;
  return rep;
}

void emit_report(const json& rep, const std::string& out_path, bool pretty);

// ---------------------------------------------------------------------------
// option bundles

struct FamilyOpts {
  std::string name = "quadratic";
  double p = 1.0;
  double scale = 1.0;
  std::string terms_path;  // JSON list for mixed families

  void attach(CLI::App* cmd) {
    cmd->add_option("--family", name, "loss family")
        ->check(CLI::IsMember({"quadratic", "ell_p", "gamma_p", "absolute", "mixed"}))
        ->capture_default_str();
    cmd->add_option("--p", p, "exponent for ell_p / gamma_p")->capture_default_str();
    cmd->add_option("--scale", scale, "scale for absolute")->capture_default_str();
    cmd->add_option("--terms", terms_path,
                    "JSON file with one {kind,p,scale,bump} object per row (mixed)");
  }

  LossFamily build(std::int64_t m, json* inputs) const {
    if (name == "quadratic") return LossFamily::quadratic(m);
    if (name == "ell_p") return LossFamily::ell_p(m, p);
    if (name == "gamma_p") return LossFamily::gamma_p(m, p);
    if (name == "absolute") return LossFamily::absolute(m, scale);
    if (name != "mixed") throw std::runtime_error("unknown family: " + name);
    if (terms_path.empty()) throw std::runtime_error("mixed family requires --terms");
    std::ifstream in(terms_path);
    if (!in) throw std::runtime_error("cannot open " + terms_path);
    json j;
    in >> j;
    if (!j.is_array() || static_cast<std::int64_t>(j.size()) != m)
      throw std::runtime_error("--terms must list exactly one term per matrix row");
    std::vector<LossTerm> terms;
    terms.reserve(j.size());
    for (const json& t : j) {
      LossTerm term;
      const std::string kind = t.at("kind").get<std::string>();
      if (kind == "ell_p") term.kind = LossKind::ell_p;
      else if (kind == "gamma_p") term.kind = LossKind::gamma_p;
      else if (kind == "quadratic") term.kind = LossKind::quadratic;
      else if (kind == "absolute") term.kind = LossKind::absolute;
      else throw std::runtime_error("unknown term kind: " + kind);
      term.p = t.value("p", 2.0);
      term.scale = t.value("scale", 1.0);
      term.bump = t.value("bump", 0.0);
      terms.push_back(term);
    }
    if (inputs) (*inputs)["terms"] = input_record(terms_path);
    return LossFamily::mixed(std::move(terms));
  }

  json echo() const {
    json j{{"family", name}};
    if (name == "ell_p" || name == "gamma_p") j["p"] = p;
    if (name == "absolute") j["scale"] = scale;
    if (name == "mixed") j["terms"] = terms_path;
    return j;
  }
};

struct MatrixOpts {
  std::string matrix_path;
  std::string format;  // "", "mtx", "csv"
  std::string response_path;

  void attach(CLI::App* cmd, bool with_response) {
    cmd->add_option("--matrix", matrix_path, "design matrix (.mtx or .csv)")->required();
    cmd->add_option("--format", format, "override format sniffing")
        ->check(CLI::IsMember({"mtx", "csv"}));
    if (with_response)
      cmd->add_option("--response", response_path,
                      "response vector; folds into a trailing bias column");
  }

  RowMatrix load(json* inputs) const {
    RowMatrix a = format.empty()
                      ? load_matrix(matrix_path)
                      : load_matrix(matrix_path, format == "mtx" ? MatrixFormat::matrix_market
                                                                 : MatrixFormat::csv);
    if (inputs) (*inputs)["matrix"] = input_record(matrix_path);
    if (!response_path.empty()) {
      const ResponseVector b = load_vector(response_path);
      if (inputs) (*inputs)["response"] = input_record(response_path);
      a = augment_bias(a, b);
    }
    return a;
  }
};

std::optional<std::uint64_t> env_seed(std::string* error) {
  const char* raw = std::getenv("GLMS_SEED");
  if (!raw || !*raw) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (errno != 0 || end == raw || *end != '\0') {
    *error = std::string("GLMS_SEED is not a valid unsigned integer: ") + raw;
    return std::nullopt;
  }
  return static_cast<std::uint64_t>(v);
}

json trace_json(const SparsifyTrace& tr) {
  return json{{"j_min", tr.j_min},
              {"j_max", tr.j_max},
              {"scale_count", tr.j_max - tr.j_min + 1},
              {"delta_init", tr.delta_init},
              {"beta", tr.beta},
              {"beta_doublings", tr.beta_doublings},
              {"rounds", tr.rounds},
              {"t_clamped", tr.t_clamped},
              {"alpha", tr.alpha},
              {"tau", tr.tau},
              {"nu_tilde", tr.nu_tilde},
              {"sample_count", tr.sample_count},
              {"homogeneous_fast_path", tr.homogeneous_fast_path},
              {"epsilon_regime_warning", tr.epsilon_regime_warning},
              {"clamped_rows", tr.clamped_rows}};
}

json validation_json(const ValidationReport& rep) {
  return json{{"points", rep.points},
              {"violations", rep.violations},
              {"violation_fraction", rep.violation_fraction},
              {"max_rel_error", rep.max_rel_error},
              {"epsilon", rep.epsilon},
              {"attempts", rep.attempts}};
}

// Median objective over a few seeded unit directions anchors the default
// scale window when the caller does not pass one.
std::pair<double, double> default_range(const RowMatrix& a, const LossFamily& family,
                                        std::uint64_t seed) {
  Rng rng(splitmix64(seed ^ 0x0a4093822299f31dULL));
  std::vector<double> vals;
  for (int k = 0; k < 8; ++k) {
    Eigen::VectorXd x(a.cols());
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = rng.normal();
    const double norm = x.norm();
    if (norm == 0.0) continue;
    x /= norm;
    const double f = glm_objective(a, family, x);
    if (std::isfinite(f) && f > 0.0) vals.push_back(f);
  }
  if (vals.size() < 4)
    throw std::runtime_error(
        "cannot infer a scale window from probe directions; pass --s-min and --s-max");
  std::sort(vals.begin(), vals.end());
  const double center = 0.5 * (vals[(vals.size() - 1) / 2] + vals[vals.size() / 2]);
  return {center / 16.0, center * 16.0};
}

// ---------------------------------------------------------------------------
// pretty rendering

void pretty_value(std::ostream& os, const json& v) {
  if (v.is_array()) {
    if (v.size() > 16) {
      os << "[" << v.size() << " values]";
      return;
    }
    os << v.dump();
    return;
  }
  os << (v.is_string() ? v.get<std::string>() : v.dump());
}

void pretty_section(std::ostream& os, const std::string& title, const json& obj) {
  os << title << "\n";
  std::size_t width = 0;
  for (const auto& [k, v] : obj.items()) width = std::max(width, k.size());
  for (const auto& [k, v] : obj.items()) {
    os << "  " << k << std::string(width - k.size() + 2, ' ');
    if (v.is_object()) {
      os << "\n";
      for (const auto& [k2, v2] : v.items()) {
        os << "    " << k2 << ": ";
        pretty_value(os, v2);
        os << "\n";
      }
      continue;
    }
    pretty_value(os, v);
    os << "\n";
  }
}

void emit_report(const json& rep, const std::string& out_path, bool pretty) {
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    out << rep.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for " + out_path);
  } else if (!pretty) {
    std::cout << rep.dump(2) << '\n';
  }
  if (pretty) {
    pretty_section(std::cout, "config", rep.at("config"));
    pretty_section(std::cout, "ledger", rep.at("ledger"));
    pretty_section(std::cout, "result", rep.at("result"));
  }
}

// ---------------------------------------------------------------------------
// subcommand payloads

struct CommonOpts {
  std::uint64_t seed = 0;
  std::string out_path;
  bool pretty = false;
  bool exact_oracles = false;

  void attach(CLI::App* cmd, std::uint64_t default_seed) {
    seed = default_seed;
    cmd->add_option("--seed", seed, "run seed (default: GLMS_SEED or 0)")
        ->capture_default_str();
    cmd->add_option("--out", out_path, "write the JSON report here instead of stdout");
    cmd->add_flag("--pretty", pretty, "render tables to stdout");
    cmd->add_flag("--exact-oracles", exact_oracles,
                  "disable multiplicative oracle noise");
  }

  NoiseConfig noise() const {
    return exact_oracles ? NoiseConfig::off() : NoiseConfig::on(0.1, seed);
  }
};

struct SparsifyCmd {
  CommonOpts common;
  MatrixOpts matrix;
  FamilyOpts family;
  double epsilon = 0.3;
  double c_m = 8.0;
  double s_min = 0.0, s_max = 0.0;  // 0 = infer
  bool no_fast_path = false;
  std::int64_t samples = 0;  // 0 = formula
  std::string sparsifier_out, text_out;

  int run(std::chrono::steady_clock::time_point started) {
    json inputs = json::object();
    const RowMatrix a = matrix.load(&inputs);
    const LossFamily fam = family.build(a.rows(), &inputs);

    std::string range_rule = "explicit";
    double lo = s_min, hi = s_max;
    if (!(lo > 0.0) || !(hi > 0.0)) {
      std::tie(lo, hi) = default_range(a, fam, common.seed);
      range_rule = "median unit-direction objective, window x16 both ways";
    }

    SparsifyConfig cfg;
    cfg.c_m = c_m;
    cfg.seed = common.seed;
    cfg.noise = common.noise();
    cfg.force_full_scale_loop = no_fast_path;
    if (samples > 0) cfg.sample_override = samples;

    QueryLedger ledger;
    SparsifyTrace trace;
    const Sparsifier sp = qglm_sparsify(a, fam, epsilon, lo, hi, cfg, ledger, &trace);

    json config{{"epsilon", epsilon},
                {"epsilon_effective", epsilon / 2.0},
                {"c_m", c_m},
                {"sample_count_rule", "ceil(c_m * tau * ln(max(m,3)) / (epsilon/2)^2)"},
                {"delta_init_rule", "(epsilon/2) * s_min / (8 * m^3 * s_max)"},
                {"aggregation_margin", 1.1},
                {"t_clamp", json::array({1, 200})},
                {"s_min", lo},
                {"s_max", hi},
                {"range_rule", range_rule},
                {"seed", common.seed},
                {"noise_enabled", !common.exact_oracles},
                {"force_full_scale_loop", no_fast_path}};
    { const json fe = family.echo(); for (const auto& [k, v] : fe.items()) config[k] = v; }

    json result{{"nnz", sp.nnz()},
                {"sample_count", sp.sample_count},
                {"nu_tilde", sp.nu_tilde},
                {"trace", trace_json(trace)},
                {"sparsifier", sparsifier_to_json(sp)}};
    if (!sparsifier_out.empty()) {
      save_sparsifier(sp, sparsifier_out);
      result["sparsifier_path"] = sparsifier_out;
    }
    if (!text_out.empty()) {
      save_sparsifier_text(sp, text_out);
      result["text_path"] = text_out;
    }

    emit_report(assemble_report("sparsify", inputs, config, ledger, result, started),
                common.out_path, common.pretty);
    return 0;
  }
};

struct ValidateCmd {
  CommonOpts common;
  MatrixOpts matrix;
  FamilyOpts family;
  std::string sparsifier_path;
  std::int64_t points = 200;
  double fail_threshold = 0.05;

  int run(std::chrono::steady_clock::time_point started) {
    json inputs = json::object();
    const RowMatrix a = matrix.load(&inputs);
    const LossFamily fam = family.build(a.rows(), &inputs);
    const Sparsifier sp = load_sparsifier(sparsifier_path);
    inputs["sparsifier"] = input_record(sparsifier_path);

    QueryLedger ledger;
    const ValidationReport rep = validate_sparsifier(a, fam, sp, points, common.seed);

    json config{{"points", points},
                {"fail_threshold", fail_threshold},
                {"seed", common.seed}};
    { const json fe = family.echo(); for (const auto& [k, v] : fe.items()) config[k] = v; }

    emit_report(
        assemble_report("validate", inputs, config, ledger, validation_json(rep), started),
        common.out_path, common.pretty);
    return rep.violation_fraction > fail_threshold ? 2 : 0;
  }
};

struct SolveCmd {
  CommonOpts common;
  std::string kind_name = "linear";
  std::string matrix_path, response_path, format;
  double lambda = 1.0;
  double p = 1.0;
  double epsilon = 0.3;
  double c_m = 8.0;
  double s_min = 0.0, s_max = 0.0;
  std::int64_t samples = 0;
  bool no_reference = false;
  bool no_fast_path = false;

  int run(std::chrono::steady_clock::time_point started) {
    json inputs = json::object();
    RowMatrix a = format.empty() ? load_matrix(matrix_path)
                                 : load_matrix(matrix_path, format == "mtx"
                                                                ? MatrixFormat::matrix_market
                                                                : MatrixFormat::csv);
    inputs["matrix"] = input_record(matrix_path);

    RegressionProblem problem;
    if (kind_name == "multiple") {
      const Eigen::MatrixXd b = load_dense_csv(response_path);
      inputs["response"] = input_record(response_path);
      problem = RegressionProblem::multiple(std::move(a), b);
    } else {
      const ResponseVector b = load_vector(response_path);
      inputs["response"] = input_record(response_path);
      if (kind_name == "linear") problem = RegressionProblem::linear(std::move(a), b);
      else if (kind_name == "ridge") problem = RegressionProblem::ridge(std::move(a), b, lambda);
      else if (kind_name == "lasso") problem = RegressionProblem::lasso(std::move(a), b, lambda);
      else if (kind_name == "ell_p") problem = RegressionProblem::ell_p(std::move(a), b, p);
      else if (kind_name == "gamma_p") problem = RegressionProblem::gamma_p(std::move(a), b, p);
      else throw std::runtime_error("unknown kind: " + kind_name);
    }

    SolveOptions opts;
    opts.epsilon = epsilon;
    opts.sparsify.c_m = c_m;
    opts.sparsify.seed = common.seed;
    opts.sparsify.noise = common.noise();
    opts.sparsify.force_full_scale_loop = no_fast_path;
    if (samples > 0) opts.sparsify.sample_override = samples;
    if (s_min > 0.0) opts.s_min = s_min;
    if (s_max > 0.0) opts.s_max = s_max;
    opts.compute_reference = !no_reference;

    QueryLedger ledger;
    const SolveReport rep = solve(problem, opts, ledger);

    json config{{"kind", kind_name},
                {"epsilon", epsilon},
                {"epsilon_effective", epsilon / 2.0},
                {"c_m", c_m},
                {"sample_count_rule", "ceil(c_m * tau * ln(max(m,3)) / (epsilon/2)^2)"},
                {"delta_init_rule", "(epsilon/2) * s_min / (8 * m^3 * s_max)"},
                {"aggregation_margin", 1.1},
                {"t_clamp", json::array({1, 200})},
                {"seed", common.seed},
                {"noise_enabled", !common.exact_oracles},
                {"compute_reference", !no_reference}};
    if (kind_name == "ridge" || kind_name == "lasso") config["lambda"] = lambda;
    if (kind_name == "ell_p" || kind_name == "gamma_p") config["p"] = p;

    json result{{"x", std::vector<double>(rep.x.data(), rep.x.data() + rep.x.size())},
                {"objective", rep.objective},
                {"sparsified_value", rep.sparsified_value},
                {"s_min", rep.s_min},
                {"s_max", rep.s_max},
                {"inner_iterations", rep.inner_iterations},
                {"short_circuit", rep.short_circuit}};
    if (!rep.note.empty()) result["note"] = rep.note;
    if (!rep.short_circuit) {
      result["nnz"] = rep.sparsifier.nnz();
      result["sample_count"] = rep.sparsifier.sample_count;
      result["trace"] = trace_json(rep.trace);
    }
    if (rep.reference_objective) {
      result["reference_objective"] = *rep.reference_objective;
      result["ratio"] = *rep.ratio;
    }

    emit_report(assemble_report("solve", inputs, config, ledger, result, started),
                common.out_path, common.pretty);
    return 0;
  }
};

struct BudgetCmd {
  CommonOpts common;
  double m = 0, n = 0, r = 0;
  double epsilon = 0.1;
  double scale_ratio = 1.0;

  int run(std::chrono::steady_clock::time_point started) {
    QueryLedger ledger;
    const BudgetReport rep = quantum_budget(m, n, r, epsilon, scale_ratio);
    json config{{"m", m}, {"n", n}, {"r", r}, {"epsilon", epsilon},
                {"scale_ratio", scale_ratio}};
    json result{{"scale_factor", rep.scale_factor},
                {"leverage_term", rep.leverage_term},
                {"matrix_exponent_term", rep.matrix_exponent_term},
                {"row_sparsity_term", rep.row_sparsity_term},
                {"quantum_total", rep.quantum_total},
                {"classical_comparison", rep.classical_comparison},
                {"note", rep.note}};
    emit_report(assemble_report("budget", json::object(), config, ledger, result, started),
                common.out_path, common.pretty);
    return 0;
  }
};

struct BenchCmd {
  CommonOpts common;
  std::string suite = "solve";
  std::string kind_name = "linear";
  FamilyOpts family;
  std::int64_t m = 400, n = 8, trials = 3;
  double epsilon = 0.3;
  double lambda = 1.0;
  double sigma = 0.1;
  std::string csv_path;

  ProblemKind parse_kind() const {
    if (kind_name == "linear") return ProblemKind::linear;
    if (kind_name == "multiple") return ProblemKind::multiple;
    if (kind_name == "ridge") return ProblemKind::ridge;
    if (kind_name == "lasso") return ProblemKind::lasso;
    if (kind_name == "ell_p") return ProblemKind::ell_p;
    if (kind_name == "gamma_p") return ProblemKind::gamma_p;
    throw std::runtime_error("unknown kind: " + kind_name);
  }

  static std::string cell(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  }

  void write_csv(const std::vector<std::string>& cols, const std::vector<json>& rows) const {
    if (csv_path.empty()) return;
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot open " + csv_path);
    for (std::size_t c = 0; c < cols.size(); ++c)
      out << cols[c] << (c + 1 < cols.size() ? "," : "\n");
    for (const json& row : rows)
      for (std::size_t c = 0; c < cols.size(); ++c)
        out << cell(row.at(cols[c])) << (c + 1 < cols.size() ? "," : "\n");
    if (!out) throw std::runtime_error("write failed for " + csv_path);
  }

  int run(std::chrono::steady_clock::time_point started) {
    QueryLedger ledger;
    std::vector<json> rows;
    std::vector<std::string> cols;
    json aggregate;

    if (suite == "solve") {
      cols = {"trial", "seed", "kind", "m", "n", "epsilon", "objective",
              "reference", "ratio", "nnz", "samples", "rounds"};
      const ProblemKind kind = parse_kind();
      SynthConfig sc;
      sc.m = m;
      sc.n = n;
      sc.lambda = lambda;
      sc.p = family.p;  // shared --p flag
      sc.noise_sigma = sigma;
      double ratio_sum = 0.0, ratio_max = 0.0;
      std::int64_t ok = 0;
      for (std::int64_t t = 0; t < trials; ++t) {
        const std::uint64_t seed = common.seed + static_cast<std::uint64_t>(t);
        const PlantedInstance inst = make_planted(kind, sc, seed);
        SolveOptions opts;
        opts.epsilon = epsilon;
        opts.sparsify.seed = seed;
        opts.sparsify.noise =
            common.exact_oracles ? NoiseConfig::off() : NoiseConfig::on(0.1, seed);
        opts.compute_reference = true;
        const SolveReport rep = solve(inst.problem, opts, ledger);
        const double ratio = rep.ratio.value_or(1.0);
        ratio_sum += ratio;
        ratio_max = std::max(ratio_max, ratio);
        if (ratio <= 1.3) ++ok;
        rows.push_back(json{{"trial", t},
                            {"seed", seed},
                            {"kind", kind_name},
                            {"m", m},
                            {"n", n},
                            {"epsilon", epsilon},
                            {"objective", rep.objective},
                            {"reference", rep.reference_objective.value_or(0.0)},
                            {"ratio", ratio},
                            {"nnz", rep.sparsifier.nnz()},
                            {"samples", rep.sparsifier.sample_count},
                            {"rounds", rep.trace.rounds}});
      }
      aggregate = json{{"trials", trials},
                       {"mean_ratio", ratio_sum / static_cast<double>(trials)},
                       {"max_ratio", ratio_max},
                       {"within_1_3", ok}};
    } else if (suite == "sparsify") {
      cols = {"trial", "seed", "family", "m", "n", "epsilon", "nnz",
              "samples", "tau", "violation_fraction", "max_rel_error"};
      double worst_fraction = 0.0, worst_err = 0.0;
      for (std::int64_t t = 0; t < trials; ++t) {
        const std::uint64_t seed = common.seed + static_cast<std::uint64_t>(t);
        SynthConfig sc;
        sc.m = m;
        sc.n = n;
        sc.noise_sigma = sigma;
        const PlantedInstance inst = make_planted(ProblemKind::linear, sc, seed);
        const RowMatrix a = augment_bias(inst.problem.a, inst.problem.b);
        const LossFamily fam = family.build(a.rows(), nullptr);
        const auto [lo, hi] = default_range(a, fam, seed);
        SparsifyConfig cfg;
        cfg.seed = seed;
        cfg.noise = common.exact_oracles ? NoiseConfig::off() : NoiseConfig::on(0.1, seed);
        SparsifyTrace trace;
        const Sparsifier sp = qglm_sparsify(a, fam, epsilon, lo, hi, cfg, ledger, &trace);
        const ValidationReport val = validate_sparsifier(a, fam, sp, 100, seed);
        worst_fraction = std::max(worst_fraction, val.violation_fraction);
        worst_err = std::max(worst_err, val.max_rel_error);
        rows.push_back(json{{"trial", t},
                            {"seed", seed},
                            {"family", family.name},
                            {"m", m},
                            {"n", n},
                            {"epsilon", epsilon},
                            {"nnz", sp.nnz()},
                            {"samples", sp.sample_count},
                            {"tau", trace.tau},
                            {"violation_fraction", val.violation_fraction},
                            {"max_rel_error", val.max_rel_error}});
      }
      aggregate = json{{"trials", trials},
                       {"worst_violation_fraction", worst_fraction},
                       {"worst_max_rel_error", worst_err}};
    } else {
      throw std::runtime_error("unknown suite: " + suite);
    }

    write_csv(cols, rows);

    json config{{"suite", suite},
                {"m", m},
                {"n", n},
                {"trials", trials},
                {"epsilon", epsilon},
                {"sigma", sigma},
                {"seed", common.seed},
                {"noise_enabled", !common.exact_oracles}};
    if (suite == "solve") {
      config["kind"] = kind_name;
      if (kind_name == "ridge" || kind_name == "lasso") config["lambda"] = lambda;
      if (kind_name == "ell_p" || kind_name == "gamma_p") config["p"] = family.p;
    } else {
      { const json fe = family.echo(); for (const auto& [k, v] : fe.items()) config[k] = v; }
    }

    json result{{"aggregate", aggregate}, {"rows", rows}};
    if (!csv_path.empty()) result["csv_path"] = csv_path;

    emit_report(assemble_report("bench", json::object(), config, ledger, result, started),
                common.out_path, common.pretty);
    return 0;
  }
};

}  // namespace

int run_cli(int argc, const char* const* argv) {
  const auto started = std::chrono::steady_clock::now();

  std::string seed_error;
  const std::uint64_t default_seed = env_seed(&seed_error).value_or(0);
  if (!seed_error.empty()) {
    std::cerr << "error: " << seed_error << "\n";
    return 1;
  }

  CLI::App app{"importance-sampled GLM sparsification toolkit"};
  app.require_subcommand(1);

  SparsifyCmd sparsify;
  auto* sp_cmd = app.add_subcommand("sparsify", "build a sparsifier for a GLM objective");
  sparsify.common.attach(sp_cmd, default_seed);
  sparsify.matrix.attach(sp_cmd, true);
  sparsify.family.attach(sp_cmd);
  sp_cmd->add_option("--eps", sparsify.epsilon, "relative accuracy target")
      ->capture_default_str();
  sp_cmd->add_option("--cm", sparsify.c_m, "sample-count constant")->capture_default_str();
  sp_cmd->add_option("--s-min", sparsify.s_min, "scale window lower end");
  sp_cmd->add_option("--s-max", sparsify.s_max, "scale window upper end");
  sp_cmd->add_flag("--no-fast-path", sparsify.no_fast_path,
                   "run the full scale loop even for homogeneous families");
  sp_cmd->add_option("--samples", sparsify.samples, "override the sample count M");
  sp_cmd->add_option("--sparsifier-out", sparsify.sparsifier_out,
                     "also write the sparsifier JSON here");
  sp_cmd->add_option("--text-out", sparsify.text_out,
                     "also write 'index weight' text rows here");

  ValidateCmd validate;
  auto* va_cmd = app.add_subcommand("validate", "check a sparsifier against its guarantee");
  validate.common.attach(va_cmd, default_seed);
  validate.matrix.attach(va_cmd, true);
  validate.family.attach(va_cmd);
  va_cmd->add_option("--sparsifier", validate.sparsifier_path, "sparsifier JSON")->required();
  va_cmd->add_option("--points", validate.points, "in-range test points")
      ->capture_default_str();
  va_cmd->add_option("--fail-threshold", validate.fail_threshold,
                     "violation fraction above which the exit code is 2")
      ->capture_default_str();

  SolveCmd solve_cmd;
  auto* so_cmd = app.add_subcommand("solve", "sparsify-then-optimize a regression problem");
  solve_cmd.common.attach(so_cmd, default_seed);
  so_cmd->add_option("--kind", solve_cmd.kind_name, "problem kind")
      ->check(CLI::IsMember({"linear", "multiple", "ridge", "lasso", "ell_p", "gamma_p"}))
      ->capture_default_str();
  so_cmd->add_option("--matrix", solve_cmd.matrix_path, "design matrix")->required();
  so_cmd->add_option("--response", solve_cmd.response_path,
                     "response vector (CSV matrix for kind=multiple)")
      ->required();
  so_cmd->add_option("--format", solve_cmd.format, "override format sniffing")
      ->check(CLI::IsMember({"mtx", "csv"}));
  so_cmd->add_option("--lambda", solve_cmd.lambda, "ridge/lasso strength")
      ->capture_default_str();
  so_cmd->add_option("--p", solve_cmd.p, "ell_p/gamma_p exponent")->capture_default_str();
  so_cmd->add_option("--eps", solve_cmd.epsilon, "relative accuracy target")
      ->capture_default_str();
  so_cmd->add_option("--cm", solve_cmd.c_m, "sample-count constant")->capture_default_str();
  so_cmd->add_option("--s-min", solve_cmd.s_min, "override the scale window lower end");
  so_cmd->add_option("--s-max", solve_cmd.s_max, "override the scale window upper end");
  so_cmd->add_option("--samples", solve_cmd.samples, "override the sample count M");
  so_cmd->add_flag("--no-reference", solve_cmd.no_reference,
                   "skip the dense baseline solve");
  so_cmd->add_flag("--no-fast-path", solve_cmd.no_fast_path,
                   "run the full scale loop even for homogeneous families");

  BudgetCmd budget;
  auto* bu_cmd = app.add_subcommand("budget", "quantum-vs-classical query budget estimate");
  budget.common.attach(bu_cmd, default_seed);
  bu_cmd->add_option("--m", budget.m, "row count")->required();
  bu_cmd->add_option("--n", budget.n, "column count")->required();
  bu_cmd->add_option("--r", budget.r, "max row sparsity")->required();
  bu_cmd->add_option("--eps", budget.epsilon, "accuracy target")->capture_default_str();
  bu_cmd->add_option("--scale-ratio", budget.scale_ratio, "s_max / s_min")
      ->capture_default_str();

  BenchCmd bench;
  auto* be_cmd = app.add_subcommand("bench", "seeded synthetic benchmark suites");
  bench.common.attach(be_cmd, default_seed);
  be_cmd->add_option("--suite", bench.suite, "solve or sparsify")
      ->check(CLI::IsMember({"solve", "sparsify"}))
      ->capture_default_str();
  be_cmd->add_option("--kind", bench.kind_name, "problem kind for the solve suite")
      ->check(CLI::IsMember({"linear", "multiple", "ridge", "lasso", "ell_p", "gamma_p"}))
      ->capture_default_str();
  bench.family.attach(be_cmd);
  be_cmd->add_option("--m", bench.m, "rows per instance")->capture_default_str();
  be_cmd->add_option("--n", bench.n, "columns per instance")->capture_default_str();
  be_cmd->add_option("--trials", bench.trials, "instances per suite")->capture_default_str();
  be_cmd->add_option("--eps", bench.epsilon, "relative accuracy target")
      ->capture_default_str();
  be_cmd->add_option("--lambda", bench.lambda, "ridge/lasso strength")
      ->capture_default_str();
  be_cmd->add_option("--sigma", bench.sigma, "planted noise level")->capture_default_str();
  be_cmd->add_option("--csv", bench.csv_path, "write per-trial rows as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (sp_cmd->parsed()) return sparsify.run(started);
    if (va_cmd->parsed()) return validate.run(started);
    if (so_cmd->parsed()) return solve_cmd.run(started);
    if (bu_cmd->parsed()) return budget.run(started);
    if (be_cmd->parsed()) return bench.run(started);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.push_back("glms");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const std::string& s : full) argv.push_back(s.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace glms
