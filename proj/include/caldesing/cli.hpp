#pragma once

// Config-driven front end: parsing, validation and the verify, comass,
// fractal and function commands. Each command returns its exit code.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cells.hpp"
#include "comass.hpp"
#include "desing.hpp"
#include "error.hpp"
#include "exterior.hpp"
#include "fractal.hpp"
#include "whitney.hpp"

namespace caldesing::cli {

enum ExitCode : int { kPass = 0, kVerificationFailure = 1, kInvalidConfig = 2, kModelBuildFailure = 3 };

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      // model
      "mode", "n", "j", "rho", "epsilon", "order", "corrupt_metric", "reach_samples",
      // singular set
      "set", "set_file", "ratio", "target_dimension", "depth", "length", "offset", "grid_depth",
      "product_depth",
      // sampling
      "samples_sheet", "samples_ambient", "samples_optimize", "samples_closedness", "samples_tube", "restarts", "seed",
      "threads",
      // tolerances
      "tol_equality", "tol_comass", "tol_closed", "tol_halving", "zero_threshold",
      // fractal and function outputs
      "box_min_depth", "box_max_depth", "sample_depth",
      // comass
      "form", "n_minus_j", "m", "l", "alpha", "beta", "lambda", "mu", "random_planes", "coefficients", "degree",
      "dim", "weights", "tolerance"};
  return keys;
}

// Flat key=value configuration. Values stay as text until a command asks for
// them with a type; every key must be known.
class RunConfig {
 public:
  static RunConfig parse(std::istream& in) {
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') throw ConfigError("line " + std::to_string(lineno) + ": CRLF line ending");
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (!known_keys().count(key)) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      if (cfg.values_.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
      if (value.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty value for '" + key + "'");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) {
    if (!known_keys().count(key)) throw ConfigError("unknown key '" + key + "'");
    values_[key] = value;
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double number(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_number(key, it->second);
  }

  long long integer(const std::string& key, long long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(it->second, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != it->second.size()) throw ConfigError("'" + key + "' must be an integer, got '" + it->second + "'");
    return v;
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      if (!it->second.empty() && it->second[0] != '-') v = std::stoull(it->second, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != it->second.size()) throw ConfigError("'" + key + "' must be a non-negative integer");
    return v;
  }

  bool boolean(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ConfigError("'" + key + "' must be true or false");
  }

  std::vector<double> numbers(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return {};
    return split_numbers(key, it->second);
  }

  // Comma-separated numbers.
  static std::vector<double> split_numbers(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(key, trim(item)));
    return out;
  }

  // Sorted key=value lines; the basis of the run hash.
  std::string normalized() const {
    std::string s;
    for (const auto& [k, v] : values_) s += k + "=" + v + "\n";
    return s;
  }

  std::string hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : normalized()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
  }

  // Decimal numbers, and fractions a/b.
  static double parse_number(const std::string& key, const std::string& text) {
    auto one = [&](const std::string& t) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(t, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != t.size() || t.empty() || !std::isfinite(v))
        throw ConfigError("'" + key + "' must be a number, got '" + text + "'");
      return v;
    };
    const auto slash = text.find('/');
    if (slash == std::string::npos) return one(text);
    const double den = one(trim(text.substr(slash + 1)));
    if (den == 0.0) throw ConfigError("'" + key + "' divides by zero");
    return one(trim(text.substr(0, slash))) / den;
  }

  std::map<std::string, std::string> values_;
};

struct CommandOptions {
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::ostream* log = &std::cout;
};

namespace detail {

inline std::string format(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::filesystem::path output_path(const CommandOptions& o, const std::string& name) {
  std::filesystem::create_directories(o.out_dir);
  return std::filesystem::path(o.out_dir) / name;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << content;
}

inline CantorSpec cantor_spec(const RunConfig& c) {
  CantorSpec s;
  if (c.has("ratio") && c.has("target_dimension")) throw ConfigError("give either ratio or target_dimension");
  s.ratio = c.has("target_dimension") ? ratio_for_dimension(c.number("target_dimension", 0.5)) : c.number("ratio", 1.0 / 3.0);
  s.depth = static_cast<int>(c.integer("depth", 6));
  s.length = c.number("length", 1.0);
  s.offset = c.number("offset", 0.0);
  s.validate();
  return s;
}

// The compact set K on R^j / rho Z^j described by the config.
inline DyadicCellSet build_set(const RunConfig& c, int j, double rho) {
  const std::string kind = c.text("set", "cantor");
  const int grid = static_cast<int>(c.integer("grid_depth", -1));
  if (kind == "empty" || kind == "full") {
    const int d = grid >= 0 ? grid : static_cast<int>(c.integer("depth", 6));
    if (kind == "empty") return DyadicCellSet(j, rho, d);
    return DyadicCellSet::full(j, rho, d);
  }
  if (kind == "file") {
    if (!c.has("set_file")) throw ConfigError("set=file needs set_file");
    std::ifstream in(c.text("set_file", ""), std::ios::binary);
    if (!in) throw ConfigError("cannot read set_file '" + c.text("set_file", "") + "'");
    DyadicCellSet s = read_cells(in, rho);
    if (s.torus_dim() != j || s.side() != rho) throw ConfigError("set_file does not match j and rho");
    return s;
  }
  const CantorSpec spec = cantor_spec(c);
  DyadicCellSet base = cantor_generate(spec, rho, grid);
  if (kind == "cantor") {
    if (j != 1) throw ConfigError("set=cantor needs j = 1; use cantor_x_point or cantor_x_interval");
    return base;
  }
  if (c.has("product_depth")) base = base.coarsened(static_cast<int>(c.integer("product_depth", base.depth())));
  if (kind == "cantor_x_point") return product_with_point(base, j - 1);
  if (kind == "cantor_x_interval") return product_with_interval(base, j - 1);
  throw ConfigError("unknown set kind '" + kind + "'");
}

inline ModelParams model_params(const RunConfig& c, const CommandOptions& o) {
  ModelParams p;
  const std::string mode = c.text("mode", "minimizing");
  if (mode == "minimizing")
    p.mode = Mode::kMinimizing;
  else if (mode == "stable_pair")
    p.mode = Mode::kStablePair;
  else
    throw ConfigError("mode must be minimizing or stable_pair");
  p.n = static_cast<int>(c.integer("n", 3));
  p.j = static_cast<int>(c.integer("j", p.mode == Mode::kStablePair ? p.n - 1 : 1));
  p.rho = c.number("rho", 4.0);
  p.epsilon = c.number("epsilon", 1e-3);
  p.order = static_cast<int>(c.integer("order", 3));
  p.corrupt_metric = c.boolean("corrupt_metric", false);
  p.reach_samples = static_cast<int>(c.integer("reach_samples", 16));
  p.seed = o.seed ? *o.seed : c.unsigned_integer("seed", 1);
  p.validate();
  return p;
}

inline VerifyPlan verify_plan(const RunConfig& c, const CommandOptions& o) {
  VerifyPlan v;
  auto count = [&](const char* key, int fallback) {
    const long long n = c.integer(key, fallback);
    if (n < 0 || n > 10000000) throw ConfigError(std::string("'") + key + "' out of range");
    return static_cast<int>(n);
  };
  auto positive = [&](const char* key, double fallback) {
    const double x = c.number(key, fallback);
    if (!(x > 0.0)) throw ConfigError(std::string("'") + key + "' must be positive");
    return x;
  };
  v.samples_sheet = count("samples_sheet", 1000);
  v.samples_ambient = count("samples_ambient", 10000);
  v.samples_optimize = count("samples_optimize", 20);
  v.samples_closedness = count("samples_closedness", 500);
  v.samples_tube = count("samples_tube", 1000);
  v.restarts = count("restarts", 0);
  v.seed = o.seed ? *o.seed : c.unsigned_integer("seed", 1);
  v.threads = count("threads", 1);
  v.tol_equality = o.tol ? *o.tol : positive("tol_equality", 1e-6);
  if (!(v.tol_equality > 0.0)) throw ConfigError("--tol must be positive");
  v.tol_comass = positive("tol_comass", 1e-4);
  v.tol_closed = positive("tol_closed", 1e-4);
  v.tol_halving = positive("tol_halving", 1e-4);
  return v;
}

// Applies the command-line overrides to the config so the run hash sees them.
inline RunConfig with_overrides(RunConfig c, const CommandOptions& o, const char* tol_key) {
  if (o.seed) c.set("seed", std::to_string(*o.seed));
  if (o.tol && tol_key) c.set(tol_key, format(*o.tol));
  return c;
}

inline nlohmann::json record_json(const CheckRecord& r) {
  nlohmann::json j;
  j["check"] = r.check;
  j["point"] = r.point;
  j["value"] = r.value;
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  if (!r.witness.empty()) j["witness"] = r.witness;
  return j;
}

inline std::string summary_csv(const VerificationReport& rep) {
  std::string s = "check,count,passed,worst,tolerance,pass\n";
  for (const auto& row : rep.summary())
    s += row.check + "," + std::to_string(row.count) + "," + std::to_string(row.passed) + "," + format(row.worst) +
         "," + format(row.tolerance) + "," + (row.pass() ? "true" : "false") + "\n";
  return s;
}

}  // namespace detail

struct VerifyOutcome {
  int exit_code = kPass;
  std::filesystem::path report;
  std::filesystem::path summary;
};

// Builds the model, runs every check and writes verify_<hash>.json and
// verify_<hash>.csv.
inline VerifyOutcome cmd_verify(const RunConfig& raw, const CommandOptions& o) {
  std::ostream& log = *o.log;
  VerifyOutcome out;
  RunConfig cfg;
  ModelParams params;
  VerifyPlan plan;
  std::optional<DyadicCellSet> set;
  try {
    cfg = detail::with_overrides(raw, o, "tol_equality");
    params = detail::model_params(cfg, o);
    plan = detail::verify_plan(cfg, o);
    set = detail::build_set(cfg, params.j, params.rho);
  } catch (const std::invalid_argument& e) {
    log << "invalid config: " << e.what() << "\n";
    out.exit_code = kInvalidConfig;
    return out;
  }
  std::optional<AmbientModel> model;
  try {
    model.emplace(build_ambient(params, *set, plan.threads));
  } catch (const ReachError& e) {
    log << "model build failed: " << e.what() << "\n";
    out.exit_code = kModelBuildFailure;
    return out;
  } catch (const std::exception& e) {
    log << "model build failed: " << e.what() << "\n";
    out.exit_code = kModelBuildFailure;
    return out;
  }
  VerificationReport rep;
  try {
    rep = verify_calibration(*model, plan);
  } catch (const Error& e) {
    CheckRecord r;
    r.check = "error";
    r.pass = false;
    rep.records.push_back(r);
    log << "verification aborted: " << e.what() << "\n";
  }
  const std::string hash = cfg.hash();
  nlohmann::json doc;
  doc["config"] = cfg.normalized();
  doc["hash"] = hash;
  doc["reach"] = model->reach();
  doc["records"] = nlohmann::json::array();
  for (const auto& r : rep.records) doc["records"].push_back(detail::record_json(r));
  if (const CheckRecord* bad = rep.first_failure()) doc["counterexample"] = detail::record_json(*bad);
  out.report = detail::output_path(o, "verify_" + hash + ".json");
  out.summary = detail::output_path(o, "verify_" + hash + ".csv");
  detail::write_file(out.report, doc.dump());
  const std::string csv = detail::summary_csv(rep);
  detail::write_file(out.summary, csv);
  log << csv;
  if (const CheckRecord* bad = rep.first_failure()) {
    log << "FAIL " << bad->check << " value " << detail::format(bad->value) << " tolerance "
        << detail::format(bad->tolerance) << "\n";
    out.exit_code = kVerificationFailure;
  }
  log << "report " << out.report.string() << "\n";
  return out;
}

namespace detail {

inline Frame parse_frame(const std::string& text, int m, const std::string& key) {
  std::vector<std::vector<double>> cols;
  std::stringstream ss(text);
  std::string col;
  while (std::getline(ss, col, ';')) {
    cols.push_back(RunConfig::split_numbers(key, col));
    if (static_cast<int>(cols.back().size()) != m)
      throw ConfigError("'" + key + "' vectors must have " + std::to_string(m) + " entries");
  }
  if (cols.empty()) throw ConfigError("'" + key + "' has no vectors");
  Eigen::MatrixXd v(m, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (int i = 0; i < m; ++i) v(i, static_cast<Eigen::Index>(c)) = cols[c][i];
  return Frame(std::move(v));
}

struct ComassProblem {
  Form form{0, 1};
  std::optional<BlockMetric> metric;
  std::vector<Frame> seeds;
  std::string description;
};

inline ComassProblem comass_problem(const RunConfig& c, std::uint64_t seed) {
  ComassProblem p;
  const std::string form = c.text("form", "torus");
  if (form == "torus") {
    TorusFormSpec s;
    s.n_minus_j = static_cast<int>(c.integer("n_minus_j", 2));
    const int m = static_cast<int>(c.integer("m", 3));
    const int l = static_cast<int>(c.integer("l", 2));
    if (m < 1 || l < 1 || l > m) throw ConfigError("torus form needs 1 <= l <= m");
    if (c.boolean("random_planes", false)) {
      auto rng = caldesing::detail::make_rng(seed, 0x706c616e, 0);
      s.alpha = caldesing::detail::gaussian_frame(m, l, rng);
      s.beta = caldesing::detail::gaussian_frame(m, l, rng);
    } else {
      std::vector<int> axes(static_cast<std::size_t>(l));
      for (int i = 0; i < l; ++i) axes[i] = i;
      s.alpha = c.has("alpha") ? parse_frame(c.text("alpha", ""), m, "alpha") : Frame::coordinate(m, axes);
      s.beta = c.has("beta") ? parse_frame(c.text("beta", ""), m, "beta") : Frame::coordinate(m, axes);
    }
    s.lambda = c.number("lambda", 1.0);
    s.mu = c.number("mu", 1.0);
    s.validate();
    p.form = build_torus_form(s);
    p.seeds = {s.x_plane(), s.y_plane()};
    p.description = "torus form";
  } else if (form == "coefficients") {
    const int dim = static_cast<int>(c.integer("dim", 0));
    const int degree = static_cast<int>(c.integer("degree", 0));
    if (dim < 1 || dim > kMaxAmbientDim || degree < 0 || degree > dim)
      throw ConfigError("coefficient form needs 1 <= dim <= 12 and 0 <= degree <= dim");
    std::vector<double> coeffs = c.numbers("coefficients");
    if (static_cast<long>(coeffs.size()) != caldesing::detail::binomial(dim, degree))
      throw ConfigError("coefficients must list C(dim, degree) values");
    p.form = Form(degree, dim, std::move(coeffs));
    p.description = "coefficient form";
  } else {
    throw ConfigError("form must be torus or coefficients");
  }
  if (c.has("weights")) {
    std::vector<double> w = c.numbers("weights");
    if (static_cast<int>(w.size()) != p.form.ambient_dim()) throw ConfigError("weights must match the form dimension");
    for (double x : w)
      if (!(x > 0.0)) throw ConfigError("weights must be positive");
    p.metric.emplace(std::move(w));
  }
  return p;
}

}  // namespace detail

// Estimates the comass of a torus form or an explicit form; writes
// comass_<hash>.csv with one row per restart.
inline int cmd_comass(const RunConfig& raw, const CommandOptions& o) {
  std::ostream& log = *o.log;
  RunConfig cfg;
  detail::ComassProblem problem;
  ComassOptions opt;
  try {
    cfg = detail::with_overrides(raw, o, "tolerance");
    opt.seed = cfg.unsigned_integer("seed", 1);
    opt.restarts = static_cast<int>(cfg.integer("restarts", 0));
    if (opt.restarts < 0) throw ConfigError("restarts must be non-negative");
    opt.tolerance = cfg.number("tolerance", 1e-10);
    if (!(opt.tolerance > 0.0)) throw ConfigError("tolerance must be positive");
    opt.threads = static_cast<int>(cfg.integer("threads", 1));
    problem = detail::comass_problem(cfg, opt.seed);
    opt.seeds = problem.seeds;
  } catch (const std::invalid_argument& e) {
    log << "invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  }
  const BlockMetric g = problem.metric ? *problem.metric : BlockMetric::flat(problem.form.ambient_dim());
  const ComassEstimate est = comass_optimize(problem.form, g, opt);
  const std::string hash = cfg.hash();
  std::string csv = "restart,value,iterations,converged\n";
  int converged = 0;
  for (std::size_t r = 0; r < est.restarts.size(); ++r) {
    const auto& s = est.restarts[r];
    converged += s.converged ? 1 : 0;
    csv += std::to_string(r) + "," + detail::format(s.value) + "," + std::to_string(s.iterations) + "," +
           (s.converged ? "true" : "false") + "\n";
  }
  const auto path = detail::output_path(o, "comass_" + hash + ".csv");
  detail::write_file(path, csv);
  log << problem.description << ": degree " << problem.form.degree() << " in R^" << problem.form.ambient_dim() << "\n";
  log << "comass lower bound " << detail::format(est.lower_bound) << "\n";
  log << "restarts " << est.restarts_used << ", converged " << converged << "\n";
  log << "witness frame (columns):\n";
  const auto& w = est.maximizer.vectors();
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) log << (c ? " " : "  ") << detail::format(w(i, c));
    log << "\n";
  }
  log << "restart table " << path.string() << "\n";
  return kPass;
}

// Writes the cell set (cells_<hash>.txt) and its box-counting table
// (boxdim_<hash>.csv).
inline int cmd_fractal(const RunConfig& raw, const CommandOptions& o) {
  std::ostream& log = *o.log;
  RunConfig cfg;
  DyadicCellSet set(1, 1.0, 0);
  int lo = 0, hi = 0;
  std::vector<std::string> header;
  try {
    cfg = detail::with_overrides(raw, o, nullptr);
    const int j = static_cast<int>(cfg.integer("j", 1));
    const double rho = cfg.number("rho", 1.0);
    if (j < 1 || j > kMaxTorusDim) throw ConfigError("j out of range");
    set = detail::build_set(cfg, j, rho);
    const std::string kind = cfg.text("set", "cantor");
    if (kind.rfind("cantor", 0) == 0) {
      const CantorSpec spec = detail::cantor_spec(cfg);
      header.push_back("ratio=" + detail::format(spec.ratio));
      header.push_back("cantor_depth=" + std::to_string(spec.depth));
      header.push_back("target_dimension=" + detail::format(spec.dimension() + (j - 1) * (kind == "cantor_x_interval")));
      lo = static_cast<int>(cfg.integer("box_min_depth", cantor_box_min_depth(spec, rho)));
      hi = static_cast<int>(cfg.integer("box_max_depth", std::min(set.depth(), cantor_box_depth(spec, rho))));
    } else {
      lo = static_cast<int>(cfg.integer("box_min_depth", 0));
      hi = static_cast<int>(cfg.integer("box_max_depth", set.depth()));
    }
    if (lo < 0 || hi > set.depth() || hi - lo < 2) throw ConfigError("box depth range needs at least 3 depths");
  } catch (const std::invalid_argument& e) {
    log << "invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  }
  const BoxDimEstimate est = box_dim(set, lo, hi);
  const std::string hash = cfg.hash();
  std::ostringstream cells, table;
  write_cells(cells, set, header);
  write_box_dim_csv(table, est);
  const auto cpath = detail::output_path(o, "cells_" + hash + ".txt");
  const auto bpath = detail::output_path(o, "boxdim_" + hash + ".csv");
  detail::write_file(cpath, cells.str());
  detail::write_file(bpath, table.str());
  for (const auto& h : header) log << h << "\n";
  log << "cells " << set.size() << " at depth " << set.depth() << "\n";
  log << "box dimension " << detail::format(est.slope) << " (rms residual " << detail::format(est.residual) << ")"
      << (est.degenerate ? " [empty set]" : "") << "\n";
  log << "set " << cpath.string() << "\ntable " << bpath.string() << "\n";
  return kPass;
}

// Builds the vanishing function; writes its samples (function_<hash>.csv) and
// a JSON digest (function_<hash>.json).
inline int cmd_function(const RunConfig& raw, const CommandOptions& o) {
  std::ostream& log = *o.log;
  RunConfig cfg;
  std::optional<DyadicCellSet> set;
  double epsilon = 0;
  int order = 0, sample_depth = 0, j = 1;
  double threshold = 0.0;
  try {
    cfg = detail::with_overrides(raw, o, "zero_threshold");
    j = static_cast<int>(cfg.integer("j", 1));
    const double rho = cfg.number("rho", 4.0);
    if (j < 1 || j > kMaxTorusDim) throw ConfigError("j out of range");
    if (!(rho > 0.0)) throw ConfigError("rho must be positive");
    epsilon = cfg.number("epsilon", 1e-3);
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    order = static_cast<int>(cfg.integer("order", 3));
    if (order < 0 || order > 12) throw ConfigError("order out of range");
    threshold = cfg.number("zero_threshold", 0.0);
    if (threshold < 0.0) throw ConfigError("zero_threshold must be non-negative");
    set = detail::build_set(cfg, j, rho);
    sample_depth = static_cast<int>(cfg.integer("sample_depth", std::min(set->depth(), 20 / j)));
    if (sample_depth < 0 || sample_depth * j > 24) throw ConfigError("sample_depth out of range");
  } catch (const std::invalid_argument& e) {
    log << "invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  }
  const SmoothFunction f = build_vanishing_function(*set, epsilon, order);
  const DyadicCellSet zeros = zero_set(f, set->depth(), threshold);
  const double norm = ck_norm(f, order, sample_depth, static_cast<int>(cfg.integer("threads", 1)));
  const std::string hash = cfg.hash();
  std::string csv;
  for (int a = 0; a < j; ++a) csv += "p" + std::to_string(a) + ",";
  csv += "value\n";
  const long long n = 1LL << sample_depth;
  long long total = 1;
  for (int a = 0; a < j; ++a) total *= n;
  const double h = f.torus_side() / static_cast<double>(n);
  for (long long i = 0; i < total; ++i) {
    std::array<double, kMaxTorusDim> p{};
    long long r = i;
    for (int a = 0; a < j; ++a) {
      p[a] = static_cast<double>(r % n) * h;
      r /= n;
      csv += detail::format(p[a]) + ",";
    }
    csv += detail::format(f.value(std::span<const double>(p.data(), j))) + "\n";
  }
  nlohmann::json doc;
  doc["config"] = cfg.normalized();
  doc["epsilon"] = epsilon;
  doc["order"] = order;
  doc["cubes"] = f.cover().cubes.size();
  doc["overlap_bound"] = f.cover().overlap_bound;
  doc["sampled_ck_norm"] = norm;
  doc["sample_depth"] = sample_depth;
  doc["zero_set_equals_set"] = zeros == *set;
  doc["zero_set_hausdorff_cells"] = hausdorff_cells(zeros, *set);
  const auto cpath = detail::output_path(o, "function_" + hash + ".csv");
  const auto jpath = detail::output_path(o, "function_" + hash + ".json");
  detail::write_file(cpath, csv);
  detail::write_file(jpath, doc.dump(2));
  log << "cubes " << f.cover().cubes.size() << ", sampled C^" << order << " norm " << detail::format(norm)
      << " (bound " << detail::format(epsilon) << ")\n";
  log << "zero set " << (zeros == *set ? "equals" : "differs from") << " the set at depth " << set->depth() << "\n";
  log << "samples " << cpath.string() << "\n";
  return kPass;
}

}  // namespace caldesing::cli
