#include "calproj/harness.hpp"

#include "calproj/entry_game.hpp"
#include "calproj/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace calproj {

using nlohmann::json;

std::string method_name(CalibrationMode mode) {
  switch (mode) {
    case CalibrationMode::calibrated: return "calibrated";
    case CalibrationMode::one_sided: return "onesided";
    case CalibrationMode::as_projection: return "as-proj";
    case CalibrationMode::constant: return "constant";
  }
  return "calibrated";
}

CalibrationMode parse_method(const std::string& name) {
  if (name == "calibrated") return CalibrationMode::calibrated;
  if (name == "onesided" || name == "one-sided" || name == "one_sided") return CalibrationMode::one_sided;
  if (name == "as-proj" || name == "as_proj" || name == "as") return CalibrationMode::as_projection;
  throw Error("unknown method '" + name + "' (expected calibrated, onesided or as-proj)");
}

KappaRule parse_kappa_rule(const std::string& name) {
  if (name == "sqrt_ln_n" || name == "sqrt_log_n") return KappaRule::sqrt_log_n;
  if (name == "n_1_7" || name == "n_pow_one_seventh") return KappaRule::n_pow_one_seventh;
  if (name == "sqrt_ln_ln_n" || name == "sqrt_log_log_n") return KappaRule::sqrt_log_log_n;
  throw Error("unknown kappa rule '" + name + "' (expected sqrt_ln_n, n_1_7 or sqrt_ln_ln_n)");
}

GmsKind parse_gms_kind(const std::string& name) {
  if (name == "hard") return GmsKind::hard_threshold;
  if (name == "smooth") return GmsKind::smooth_threshold;
  if (name == "truncated_linear" || name == "truncated-linear") return GmsKind::truncated_linear;
  if (name == "linear") return GmsKind::linear;
  throw Error("unknown gms function '" + name + "' (expected hard, smooth, truncated_linear or linear)");
}

namespace {

template <class T>
T field_as(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, "has the wrong type");
  }
}

template <class Fn>
auto wrap(const std::string& key, Fn fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("<document>", "expected an object");
  ExperimentConfig c;
  static const std::set<std::string> known = {"dgp",     "n",          "mc_reps",  "B",     "alpha",     "rho",
                                              "eta",     "kappa",      "gms",      "components", "methods", "seed",
                                              "threads", "conv_tol",   "max_iter", "record_time", "output"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError(it.key(), "unknown field");

  if (j.contains("dgp")) {
    c.dgp = field_as<std::string>(j, "dgp");
    wrap("dgp", [&] { return parse_entry_dgp(c.dgp); });
  }
  if (j.contains("n")) c.n = field_as<int>(j, "n");
  if (c.n < 2) throw ConfigError("n", "must be at least 2");
  if (j.contains("mc_reps")) c.mc_reps = field_as<int>(j, "mc_reps");
  if (c.mc_reps < 1) throw ConfigError("mc_reps", "must be at least 1");
  if (j.contains("B")) c.B = field_as<int>(j, "B");
  if (c.B < 1) throw ConfigError("B", "must be at least 1");
  if (j.contains("alpha")) {
    if (j["alpha"].is_array())
      c.alphas = field_as<std::vector<double>>(j, "alpha");
    else
      c.alphas = {field_as<double>(j, "alpha")};
  }
  if (c.alphas.empty()) throw ConfigError("alpha", "is empty");
  for (double a : c.alphas)
    if (!(a > 0.0 && a < 0.5)) throw ConfigError("alpha", "values must lie in (0, 0.5)");
  if (j.contains("rho")) {
    if (j["rho"].is_string() && j["rho"] == "inf")
      c.rho = kInf;
    else
      c.rho = field_as<double>(j, "rho");
    if (!(c.rho > 0.0)) throw ConfigError("rho", "must be positive");
  }
  if (j.contains("eta")) c.eta = field_as<double>(j, "eta");
  if (!(c.eta > 0.0 && c.eta < 1.0)) throw ConfigError("eta", "must lie in (0, 1)");
  if (j.contains("kappa")) {
    if (j["kappa"].is_number()) {
      c.gms.kappa = field_as<double>(j, "kappa");
      if (!(c.gms.kappa > 0.0)) throw ConfigError("kappa", "must be positive");
    } else {
      c.gms.rule = wrap("kappa", [&] { return parse_kappa_rule(field_as<std::string>(j, "kappa")); });
    }
  }
  if (j.contains("gms")) c.gms.kind = wrap("gms", [&] { return parse_gms_kind(field_as<std::string>(j, "gms")); });
  EntryGame game(parse_entry_dgp(c.dgp));
  if (j.contains("components")) {
    if (!j["components"].is_array()) throw ConfigError("components", "expected a list");
    auto names = game.parameter_names();
    for (const auto& e : j["components"]) {
      int k = -1;
      if (e.is_number_integer()) {
        k = e.get<int>();
      } else if (e.is_string()) {
        auto pos = std::find(names.begin(), names.end(), e.get<std::string>());
        if (pos != names.end()) k = static_cast<int>(pos - names.begin());
      }
      if (k < 0 || k >= game.dim()) throw ConfigError("components", "unknown component " + e.dump());
      c.components.push_back(k);
    }
  }
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : field_as<std::vector<std::string>>(j, "methods"))
      c.methods.push_back(wrap("methods", [&] { return parse_method(m); }));
    if (c.methods.empty()) throw ConfigError("methods", "is empty");
  }
  if (j.contains("seed")) c.seed = field_as<std::uint64_t>(j, "seed");
  if (j.contains("threads")) c.threads = field_as<int>(j, "threads");
  if (c.threads < 1) throw ConfigError("threads", "must be at least 1");
  if (j.contains("conv_tol")) c.conv_tol = field_as<double>(j, "conv_tol");
  if (!(c.conv_tol > 0.0)) throw ConfigError("conv_tol", "must be positive");
  if (j.contains("max_iter")) c.max_iter = field_as<int>(j, "max_iter");
  if (j.contains("record_time")) c.record_time = field_as<bool>(j, "record_time");
  if (j.contains("output")) c.output = field_as<std::string>(j, "output");
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

MonteCarloResult run_monte_carlo(const ExperimentConfig& config) {
  const EntryGame game(parse_entry_dgp(config.dgp));
  const MomentModel model = game.moment_model();
  const auto bounds = game.true_bounds();
  const auto names = game.parameter_names();
  const int d = game.dim();

  std::vector<int> comps = config.components;
  if (comps.empty())
    for (int k = 0; k < d; ++k)
      if (bounds[k]) comps.push_back(k);
  for (int k : comps)
    if (!bounds[k]) throw ConfigError("components", "no true bound is known for " + names[k]);

  struct Cell {
    int comp;
    double alpha;
    CalibrationMode method;
  };
  std::vector<Cell> cells;
  for (int k : comps)
    for (double a : config.alphas)
      for (CalibrationMode m : config.methods) cells.push_back({k, a, m});

  const double rho = config.rho > 0.0 ? config.rho : rho_from_eta(config.eta, model.J(), d);
  const int reps = config.mc_reps;
  MonteCarloResult out;
  out.outcomes.assign(cells.size(), std::vector<ReplicationOutcome>(reps));

  parallel_for(reps, config.threads, [&](int rep) {
    const std::uint64_t rs = derive_seed(config.seed, static_cast<std::uint64_t>(rep));
    const MomentSample sample(model, game.simulate(config.n, derive_seed(rs, 0)));
    for (size_t ci = 0; ci < cells.size(); ++ci) {
      const Cell& cell = cells[ci];
      CiOptions opt;
      opt.mode = cell.method;
      opt.alpha = cell.alpha;
      opt.rho = rho;
      opt.gms = config.gms;
      opt.B = config.B;
      opt.seed = derive_seed(rs, 1);
      opt.eam.seed = derive_seed(rs, 2);
      opt.eam.conv_tol = config.conv_tol;
      opt.eam.max_iter = config.max_iter;
      opt.threads = 1;
      Vector p = Vector::Zero(d);
      p[cell.comp] = 1.0;
      ReplicationOutcome& o = out.outcomes[ci][rep];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        CiResult r = confidence_interval(sample, p, opt);
        o.lower = r.lower;
        o.upper = r.upper;
        o.empty = r.empty;
      } catch (const Error&) {
        o.failed = true;
      }
      o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  });

  for (size_t ci = 0; ci < cells.size(); ++ci) {
    const Cell& cell = cells[ci];
    const auto& b = *bounds[cell.comp];
    std::vector<double> lo, hi;
    int cov_lo = 0, cov_hi = 0, empty = 0;
    double secs = 0.0;
    for (const auto& o : out.outcomes[ci]) {
      secs += o.seconds;
      if (o.empty || o.failed) {
        ++empty;
        continue;
      }
      lo.push_back(o.lower);
      hi.push_back(o.upper);
      if (o.lower <= b.first) ++cov_lo;
      if (o.upper >= b.second) ++cov_hi;
    }
    ResultRow row;
    row.component = names[cell.comp];
    row.alpha = cell.alpha;
    row.median_lower = median(lo);
    row.median_upper = median(hi);
    row.coverage_lower = static_cast<double>(cov_lo) / reps;
    row.coverage_upper = static_cast<double>(cov_hi) / reps;
    row.se_lower = std::sqrt(row.coverage_lower * (1.0 - row.coverage_lower) / reps);
    row.se_upper = std::sqrt(row.coverage_upper * (1.0 - row.coverage_upper) / reps);
    row.avg_time_s = config.record_time ? secs / reps : std::nan("");
    row.method = method_name(cell.method);
    row.empty_fraction = static_cast<double>(empty) / reps;
    row.reps = reps;
    out.rows.push_back(row);
  }
  return out;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows, bool with_time) {
  os << "component,alpha,median_lower,median_upper,coverage_lower,coverage_upper,avg_time_s,method,"
        "se_lower,se_upper,empty_fraction,reps\n";
  auto num = [](double x) {
    if (std::isnan(x)) return std::string("NA");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    os << r.component << ',' << num(r.alpha) << ',' << num(r.median_lower) << ',' << num(r.median_upper) << ','
       << num(r.coverage_lower) << ',' << num(r.coverage_upper) << ','
       << (with_time ? num(r.avg_time_s) : std::string("NA")) << ',' << r.method << ',' << num(r.se_lower) << ','
       << num(r.se_upper) << ',' << num(r.empty_fraction) << ',' << r.reps << '\n';
  }
}

Matrix read_csv_matrix(const std::string& path, std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": empty file");
  auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok.erase(0, tok.find_first_not_of(" \t\r"));
      tok.erase(tok.find_last_not_of(" \t\r") + 1);
      parts.push_back(tok);
    }
    return parts;
  };
  const auto head = split(line);
  if (header) *header = head;
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto parts = split(line);
    if (parts.size() != head.size())
      throw Error(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(head.size()) + " columns");
    std::vector<double> r;
    for (const auto& p : parts) {
      size_t used = 0;
      double v = 0;
      try {
        v = std::stod(p, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != p.size() || p.empty()) throw Error(path + ":" + std::to_string(lineno) + ": not a number '" + p + "'");
      r.push_back(v);
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw Error(path + ": no data rows");
  Matrix m(rows.size(), head.size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t k = 0; k < head.size(); ++k) m(i, k) = rows[i][k];
  return m;
}

void write_csv_matrix(std::ostream& os, const Matrix& data, const std::vector<std::string>& header) {
  for (size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
  os << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index k = 0; k < data.cols(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", data(i, k));
      os << (k ? "," : "") << buf;
    }
    os << '\n';
  }
}

namespace {

Vector json_vector(const json& j, const std::string& key) {
  auto v = field_as<std::vector<double>>(j, key);
  return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

MomentModel mean_model(int k, Box box) {
  return MomentModel::separable(
      "mean", 0, k, std::move(box), [](const Matrix& x) { return x; }, [](const Vector& t) { return t; },
      [k](const Vector&) { return Matrix(Matrix::Identity(k, k)); });
}

Box box_from(const json& j, int d, double default_half_width) {
  Vector lo = Vector::Constant(d, -default_half_width), hi = Vector::Constant(d, default_half_width);
  if (j.contains("lower")) lo = json_vector(j, "lower");
  if (j.contains("upper")) hi = json_vector(j, "upper");
  if (lo.size() != d) throw ConfigError("lower", "expected " + std::to_string(d) + " entries");
  if (hi.size() != d) throw ConfigError("upper", "expected " + std::to_string(d) + " entries");
  if (!(lo.array() < hi.array()).all()) throw ConfigError("upper", "must exceed lower");
  return Box(lo, hi);
}

}  // namespace

MomentModel load_moment_model(const std::string& name, int data_cols) {
  if (name.rfind("entry-", 0) == 0) return EntryGame(parse_entry_dgp(name.substr(6))).moment_model();
  if (name == "mean") {
    if (data_cols < 1) throw Error("mean model needs at least one data column");
    return mean_model(data_cols, box_from(json::object(), data_cols, 10.0));
  }
  std::ifstream in(name);
  if (!in) throw ConfigError("model", "unknown model '" + name + "' and no such file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("model", std::string("not valid JSON: ") + e.what());
  }
  if (!j.contains("family")) throw ConfigError("family", "missing");
  const auto family = field_as<std::string>(j, "family");
  if (family == "entry_game") {
    if (!j.contains("dgp")) throw ConfigError("dgp", "missing");
    return wrap("dgp", [&] { return EntryGame(parse_entry_dgp(field_as<std::string>(j, "dgp"))).moment_model(); });
  }
  if (family == "mean") {
    if (data_cols < 1) throw ConfigError("family", "mean model needs data");
    return mean_model(data_cols, box_from(j, data_cols, 10.0));
  }
  if (family == "linear") {
    // m_j = a_j' theta - X_j; the first J1 rows of A are inequalities
    if (!j.contains("A")) throw ConfigError("A", "missing");
    auto rows = field_as<std::vector<std::vector<double>>>(j, "A");
    if (rows.empty() || rows[0].empty()) throw ConfigError("A", "is empty");
    const int m = static_cast<int>(rows.size()), d = static_cast<int>(rows[0].size());
    Matrix A(m, d);
    for (int i = 0; i < m; ++i) {
      if (static_cast<int>(rows[i].size()) != d) throw ConfigError("A", "rows differ in length");
      for (int k = 0; k < d; ++k) A(i, k) = rows[i][k];
    }
    const int J2 = j.contains("J2") ? field_as<int>(j, "J2") : 0;
    if (J2 < 0 || J2 > m) throw ConfigError("J2", "out of range");
    const int paired = j.contains("paired") ? field_as<int>(j, "paired") : 0;
    if (data_cols >= 0 && data_cols != m) throw ConfigError("A", "row count must equal the number of data columns");
    return MomentModel::separable(
        "linear", m - J2, J2, box_from(j, d, 10.0), [](const Matrix& x) { return Matrix(-x); },
        [A](const Vector& t) { return Vector(-A * t); }, [A](const Vector&) { return Matrix(-A); }, paired);
  }
  throw ConfigError("family", "unknown family '" + family + "'");
}

}  // namespace calproj
