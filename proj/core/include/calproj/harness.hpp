#pragma once

#include "calproj/common.hpp"
#include "calproj/critical_level.hpp"
#include "calproj/eam.hpp"
#include "calproj/moment_model.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace calproj {

// Malformed configuration; field() names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  std::string dgp = "set1";
  int n = 1000;
  int mc_reps = 100;
  int B = 200;
  std::vector<double> alphas = {0.05};
  // rho <= 0 means derive it from eta
  double rho = 0.0;
  double eta = 0.01;
  GmsConfig gms;
  // parameter indices; empty means every component with a known true bound
  std::vector<int> components;
  std::vector<CalibrationMode> methods = {CalibrationMode::calibrated};
  std::uint64_t seed = 1;
  int threads = 1;
  double conv_tol = 0.005;
  int max_iter = 200;
  // write avg_time_s as NA so repeated runs give identical files
  bool record_time = true;
  std::string output;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

std::string method_name(CalibrationMode mode);
CalibrationMode parse_method(const std::string& name);
KappaRule parse_kappa_rule(const std::string& name);
GmsKind parse_gms_kind(const std::string& name);

struct ResultRow {
  std::string component;
  double alpha = 0.05;
  double median_lower = 0.0;
  double median_upper = 0.0;
  double coverage_lower = 0.0;
  double coverage_upper = 0.0;
  double avg_time_s = 0.0;
  std::string method;
  double se_lower = 0.0;
  double se_upper = 0.0;
  double empty_fraction = 0.0;
  int reps = 0;
};

// One replication's interval for a (component, alpha, method) cell.
struct ReplicationOutcome {
  double lower = 0.0;
  double upper = 0.0;
  bool empty = false;
  bool failed = false;
  double seconds = 0.0;
};

struct MonteCarloResult {
  std::vector<ResultRow> rows;
  // outcomes[cell][rep], cells ordered as rows
  std::vector<std::vector<ReplicationOutcome>> outcomes;
};

MonteCarloResult run_monte_carlo(const ExperimentConfig& config);

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows, bool with_time = true);

// Data CSV: a header row followed by numeric rows.
Matrix read_csv_matrix(const std::string& path, std::vector<std::string>* header = nullptr);
void write_csv_matrix(std::ostream& os, const Matrix& data, const std::vector<std::string>& header);

// Built-in names: entry-set1, entry-set2-dgp1..3, mean. Otherwise a JSON file
// with "family" one of entry_game, mean, linear. Families that depend on the
// data width (mean) use `data_cols`.
MomentModel load_moment_model(const std::string& name_or_path, int data_cols);

}  // namespace calproj
