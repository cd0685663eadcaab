#include "cli.hpp"

#include "calproj/critical_level.hpp"
#include "calproj/eam.hpp"
#include "calproj/entry_game.hpp"
#include "calproj/harness.hpp"
#include "calproj/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace calproj {

namespace {

struct Shared {
  std::string model;
  std::string data;
  std::vector<double> p;
  int component = -1;
  double alpha = 0.05;
  double rho = 0.0;
  double eta = 0.01;
  std::string kappa;
  std::string gms = "hard";
  int B = 1000;
  std::uint64_t seed = 1;
};

void add_shared(CLI::App* cmd, Shared& s) {
  cmd->add_option("--model", s.model, "built-in model name or JSON model file")->required();
  cmd->add_option("--data", s.data, "CSV data file with a header row")->required()->check(CLI::ExistingFile);
  cmd->add_option("--p", s.p, "direction vector, comma separated")->delimiter(',');
  cmd->add_option("--component", s.component, "unit direction on this parameter index");
  cmd->add_option("--alpha", s.alpha, "nominal level")->check(CLI::Range(1e-6, 0.5));
  cmd->add_option("--rho", s.rho, "localisation box radius (default from --eta)");
  cmd->add_option("--eta", s.eta, "target probability that the rho box binds");
  cmd->add_option("--kappa", s.kappa, "GMS tuning: a number or sqrt_ln_n, n_1_7, sqrt_ln_ln_n");
  cmd->add_option("--gms", s.gms, "GMS function: hard, smooth, truncated_linear, linear");
  cmd->add_option("--B", s.B, "bootstrap replicates")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", s.seed, "random seed");
}

GmsConfig gms_from(const Shared& s) {
  GmsConfig g;
  try {
    g.kind = parse_gms_kind(s.gms);
  } catch (const Error& e) {
    throw ConfigError("--gms", e.what());
  }
  if (!s.kappa.empty()) {
    char* end = nullptr;
    double k = std::strtod(s.kappa.c_str(), &end);
    if (end && *end == '\0' && k > 0)
      g.kappa = k;
    else
      try {
        g.rule = parse_kappa_rule(s.kappa);
      } catch (const Error& e) {
        throw ConfigError("--kappa", e.what());
      }
  }
  return g;
}

Vector direction_from(const Shared& s, int d) {
  Vector p;
  if (!s.p.empty()) {
    if (static_cast<int>(s.p.size()) != d)
      throw ConfigError("--p", "expected " + std::to_string(d) + " entries, got " + std::to_string(s.p.size()));
    p = Eigen::Map<const Vector>(s.p.data(), d);
  } else if (s.component >= 0) {
    if (s.component >= d) throw ConfigError("--component", "out of range");
    p = Vector::Unit(d, s.component);
  } else {
    throw ConfigError("--p", "give a direction with --p or --component");
  }
  if (p.norm() == 0.0) throw ConfigError("--p", "direction is zero");
  return p;
}

double rho_from(const Shared& s, const MomentModel& m) {
  if (s.rho > 0.0) return s.rho;
  return rho_from_eta(s.eta, m.J(), m.dim());
}

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Calibrated projection confidence intervals for partially identified models", "calproj"};
  app.require_subcommand(1);

  // ci
  Shared ci;
  std::string mode = "calibrated", ci_out;
  double conv_tol = 0.005;
  int max_iter = 200, threads = 1;
  auto* ci_cmd = app.add_subcommand("ci", "confidence interval for p'theta");
  add_shared(ci_cmd, ci);
  ci_cmd->add_option("--mode", mode, "calibrated, onesided or as-proj");
  ci_cmd->add_option("--conv-tol", conv_tol, "E-A-M convergence tolerance")->check(CLI::PositiveNumber);
  ci_cmd->add_option("--max-iter", max_iter, "E-A-M iteration cap")->check(CLI::PositiveNumber);
  ci_cmd->add_option("--threads", threads, "threads (the two endpoints run concurrently)");
  ci_cmd->add_option("--out", ci_out, "write the result as JSON (.json) or CSV");

  // chat
  Shared ch;
  std::vector<double> theta;
  auto* chat_cmd = app.add_subcommand("chat", "calibrated critical level at one theta");
  add_shared(chat_cmd, ch);
  chat_cmd->add_option("--theta", theta, "parameter value, comma separated")->delimiter(',')->required();

  // rho
  double eta = 0.01;
  int J = 0, d = 0;
  auto* rho_cmd = app.add_subcommand("rho", "rho from the eta heuristic");
  rho_cmd->add_option("--eta", eta, "probability that the box binds")->required()->check(CLI::Range(1e-12, 0.999999));
  rho_cmd->add_option("--J", J, "number of moments")->required()->check(CLI::PositiveNumber);
  rho_cmd->add_option("--d", d, "parameter dimension")->required()->check(CLI::PositiveNumber);

  // simulate
  std::string dgp, sim_out;
  int n = 0;
  std::uint64_t sim_seed = 1;
  auto* sim_cmd = app.add_subcommand("simulate", "simulate entry game data");
  sim_cmd->add_option("--dgp", dgp, "set1, set2-dgp1, set2-dgp2 or set2-dgp3")
      ->required()
      ->check(CLI::IsMember({"set1", "set2-dgp1", "set2-dgp2", "set2-dgp3"}));
  sim_cmd->add_option("--n", n, "sample size")->required()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim_seed, "random seed");
  sim_cmd->add_option("--out", sim_out, "output CSV (stdout if omitted)");

  // mc
  std::string config_path, mc_out;
  int mc_threads = 0;
  bool no_time = false;
  auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo coverage experiment");
  mc_cmd->add_option("--config", config_path, "JSON experiment configuration")->required();
  mc_cmd->add_option("--threads", mc_threads, "override the configured thread count");
  mc_cmd->add_option("--out", mc_out, "results CSV (overrides the configured output)");
  mc_cmd->add_flag("--no-time", no_time, "write NA for timings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*rho_cmd) {
      out << num(rho_from_eta(eta, J, d)) << '\n';
      return 0;
    }

    if (*sim_cmd) {
      EntryGame game(parse_entry_dgp(dgp));
      Matrix data = game.simulate(n, sim_seed);
      if (sim_out.empty()) {
        write_csv_matrix(out, data, {"y1", "y2", "z"});
      } else {
        std::ofstream f(sim_out);
        if (!f) throw Error("cannot write " + sim_out);
        write_csv_matrix(f, data, {"y1", "y2", "z"});
      }
      return 0;
    }

    if (*mc_cmd) {
      std::ifstream probe(config_path);
      if (!probe) {
        err << "error: cannot open config file '" << config_path << "'\n";
        return 2;
      }
      ExperimentConfig cfg = load_experiment_config(config_path);
      if (mc_threads > 0) cfg.threads = mc_threads;
      if (!mc_out.empty()) cfg.output = mc_out;
      if (no_time) cfg.record_time = false;
      MonteCarloResult res = run_monte_carlo(cfg);
      write_results_csv(out, res.rows, cfg.record_time);
      if (!cfg.output.empty()) {
        std::ofstream f(cfg.output);
        if (!f) throw Error("cannot write " + cfg.output);
        write_results_csv(f, res.rows, cfg.record_time);
      }
      return 0;
    }

    if (*chat_cmd) {
      Matrix data = read_csv_matrix(ch.data);
      MomentModel model = load_moment_model(ch.model, static_cast<int>(data.cols()));
      if (static_cast<int>(theta.size()) != model.dim())
        throw ConfigError("--theta", "expected " + std::to_string(model.dim()) + " entries");
      Vector th = Eigen::Map<const Vector>(theta.data(), model.dim());
      Vector p = direction_from(ch, model.dim());
      CriticalLevel c = critical_level(model, data, th, p, ch.alpha, rho_from(ch, model), gms_from(ch), ch.B, ch.seed);
      out << "value = " << num(c.value) << '\n'
          << "bracket = [" << num(c.bracket_lower) << ", " << num(c.bracket_upper) << "]\n"
          << "upper_bound = " << num(c.upper_bound) << '\n'
          << "iterations = " << c.iterations << '\n'
          << "coverage = " << num(c.coverage_at_value) << '\n'
          << "bound_hit = " << (c.bound_hit ? "true" : "false") << '\n';
      return 0;
    }

    if (*ci_cmd) {
      Matrix data = read_csv_matrix(ci.data);
      MomentModel model = load_moment_model(ci.model, static_cast<int>(data.cols()));
      Vector p = direction_from(ci, model.dim());
      CiOptions opt;
      try {
        opt.mode = parse_method(mode);
      } catch (const Error& e) {
        throw ConfigError("--mode", e.what());
      }
      opt.alpha = ci.alpha;
      opt.rho = rho_from(ci, model);
      opt.gms = gms_from(ci);
      opt.B = ci.B;
      opt.seed = ci.seed;
      opt.eam.seed = derive_seed(ci.seed, 1);
      opt.eam.conv_tol = conv_tol;
      opt.eam.max_iter = max_iter;
      opt.threads = threads;
      MomentSample sample(model, std::move(data));
      CiResult r = confidence_interval(sample, p, opt);

      out << "lower = " << num(r.lower) << '\n' << "upper = " << num(r.upper) << '\n';
      out << "empty = " << (r.empty ? "true" : "false") << '\n';
      auto describe = [&](const char* side, const EamResult& e) {
        out << side << ": L = " << e.state.size() << ", iterations = " << e.iterations
            << ", converged = " << (e.converged ? "true" : "false") << "\n  ei trace:";
        for (const auto& h : e.state.history) out << ' ' << num(h.ei_max);
        out << '\n';
      };
      describe("lower", r.lower_run);
      describe("upper", r.upper_run);

      if (!ci_out.empty()) {
        std::ofstream f(ci_out);
        if (!f) throw Error("cannot write " + ci_out);
        const bool as_json = ci_out.size() >= 5 && ci_out.substr(ci_out.size() - 5) == ".json";
        if (as_json) {
          auto run = [](const EamResult& e) {
            nlohmann::json j;
            j["L"] = e.state.size();
            j["iterations"] = e.iterations;
            j["converged"] = e.converged;
            std::vector<double> trace;
            for (const auto& h : e.state.history) trace.push_back(h.ei_max);
            j["ei_trace"] = trace;
            return j;
          };
          nlohmann::json j;
          j["lower"] = r.empty ? nlohmann::json() : nlohmann::json(r.lower);
          j["upper"] = r.empty ? nlohmann::json() : nlohmann::json(r.upper);
          j["empty"] = r.empty;
          j["lower_run"] = run(r.lower_run);
          j["upper_run"] = run(r.upper_run);
          f << j.dump(2) << '\n';
        } else {
          f << "lower,upper,empty,L_lower,L_upper,iterations_lower,iterations_upper\n"
            << num(r.lower) << ',' << num(r.upper) << ',' << (r.empty ? 1 : 0) << ',' << r.lower_run.state.size()
            << ',' << r.upper_run.state.size() << ',' << r.lower_run.iterations << ',' << r.upper_run.iterations
            << '\n';
        }
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace calproj
