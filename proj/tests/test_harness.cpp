#include "doctest.h"

#include "calproj/entry_game.hpp"
#include "calproj/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

using namespace calproj;

namespace {

std::string field_of(const std::string& json) {
  try {
    parse_experiment_config(json);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

std::string temp_path(const std::string& name) { return "calproj_test_" + name; }

}  // namespace

TEST_CASE("config defaults and overrides") {
  ExperimentConfig c = parse_experiment_config("{}");
  CHECK(c.dgp == "set1");
  CHECK(c.n == 1000);
  CHECK(c.mc_reps == 100);
  CHECK(c.B == 200);
  CHECK(c.conv_tol == doctest::Approx(0.005));

  ExperimentConfig d = parse_experiment_config(
      R"({"dgp":"set2-dgp3","n":400,"alpha":[0.05,0.1],"rho":"inf","gms":"smooth","kappa":"n_1_7",
          "methods":["calibrated","as-proj"],"components":[0,4],"seed":9,"record_time":false})");
  CHECK(d.dgp == "set2-dgp3");
  CHECK(d.alphas.size() == 2);
  CHECK(std::isinf(d.rho));
  CHECK(d.gms.kind == GmsKind::smooth_threshold);
  CHECK(d.gms.rule == KappaRule::n_pow_one_seventh);
  CHECK(d.methods.size() == 2);
  CHECK(d.components == std::vector<int>{0, 4});
  CHECK_FALSE(d.record_time);
}

TEST_CASE("config errors name the field") {
  CHECK(field_of(R"({"alphas":[0.05]})") == "alphas");
  CHECK(field_of(R"({"n":1})") == "n");
  CHECK(field_of(R"({"n":"many"})") == "n");
  CHECK(field_of(R"({"dgp":"set9"})") == "dgp");
  CHECK(field_of(R"({"alpha":0.7})") == "alpha");
  CHECK(field_of(R"({"rho":-1})") == "rho");
  CHECK(field_of(R"({"methods":["bayes"]})") == "methods");
  CHECK(field_of(R"({"gms":"soft"})") == "gms");
  CHECK_THROWS_AS(parse_experiment_config("{not json"), ConfigError);
  CHECK_THROWS_AS(load_experiment_config("no/such/file.json"), ConfigError);
}

TEST_CASE("name parsers") {
  for (CalibrationMode m : {CalibrationMode::calibrated, CalibrationMode::one_sided, CalibrationMode::as_projection})
    CHECK(parse_method(method_name(m)) == m);
  CHECK(parse_kappa_rule("sqrt_ln_ln_n") == KappaRule::sqrt_log_log_n);
  CHECK(parse_gms_kind("truncated_linear") == GmsKind::truncated_linear);
  CHECK_THROWS(parse_gms_kind("nope"));
}

TEST_CASE("results csv") {
  ResultRow r;
  r.component = "delta1";
  r.coverage_lower = 0.9;
  r.reps = 10;
  r.avg_time_s = 1.5;
  r.method = "calibrated";
  std::ostringstream with, without;
  write_results_csv(with, {r}, true);
  write_results_csv(without, {r}, false);
  CHECK(with.str().rfind(
            "component,alpha,median_lower,median_upper,coverage_lower,coverage_upper,avg_time_s,method,se_lower,"
            "se_upper,empty_fraction,reps\n",
            0) == 0);
  CHECK(with.str().find("1.500000") != std::string::npos);
  CHECK(without.str().find(",NA,") != std::string::npos);
}

TEST_CASE("data csv round trip") {
  Matrix m(3, 2);
  m << 1.0, 0.1, -2.5, 1e-17, 3.0, 1.0 / 3.0;
  const std::string path = temp_path("roundtrip.csv");
  {
    std::ofstream f(path);
    write_csv_matrix(f, m, {"a", "b"});
  }
  std::vector<std::string> header;
  Matrix back = read_csv_matrix(path, &header);
  std::remove(path.c_str());
  CHECK(header == std::vector<std::string>{"a", "b"});
  CHECK(back == m);
  CHECK_THROWS(read_csv_matrix("no/such.csv"));
}

TEST_CASE("model loading") {
  CHECK(load_moment_model("entry-set1", 3).dim() == 5);
  CHECK(load_moment_model("mean", 2).J2() == 2);
  const std::string path = temp_path("linear.json");
  {
    std::ofstream f(path);
    f << R"({"family":"linear","A":[[1,0],[0,1],[1,1]],"J2":1,"lower":[-1,-1],"upper":[1,1]})";
  }
  MomentModel m = load_moment_model(path, 3);
  std::remove(path.c_str());
  CHECK(m.J1() == 2);
  CHECK(m.J2() == 1);
  CHECK(m.box().upper == Vector::Ones(2));
  CHECK_THROWS_AS(load_moment_model("nothing-here", 1), ConfigError);
}

TEST_CASE("small monte carlo run") {
  ExperimentConfig c;
  c.dgp = "set1";
  c.n = 300;
  c.mc_reps = 3;
  c.B = 40;
  c.components = {0};
  c.record_time = false;
  c.seed = 4;
  MonteCarloResult a = run_monte_carlo(c);
  REQUIRE(a.rows.size() == 1);
  const ResultRow& r = a.rows[0];
  CHECK(r.reps == 3);
  CHECK(r.component == EntryGame(EntryDgp::set1).parameter_names()[0]);
  CHECK(r.se_lower == doctest::Approx(std::sqrt(r.coverage_lower * (1 - r.coverage_lower) / 3)));
  CHECK(r.se_upper == doctest::Approx(std::sqrt(r.coverage_upper * (1 - r.coverage_upper) / 3)));
  for (const auto& o : a.outcomes[0]) {
    CHECK_FALSE(o.failed);
    CHECK(o.lower <= o.upper);
  }
  std::ostringstream x, y;
  write_results_csv(x, a.rows, false);
  write_results_csv(y, run_monte_carlo(c).rows, false);
  CHECK(x.str() == y.str());
}
