#include "doctest.h"

#include "calproj/eam.hpp"
#include "calproj/normal.hpp"

#include <cmath>
#include <random>

using namespace calproj;

namespace {

EamProblem toy_problem(double c) {
  EamProblem p;
  p.box = Box(Vector::Zero(1), Vector::Ones(1));
  p.objective = Objective::linear(Vector::Ones(1));
  p.constraints.values = [](const Vector& t) { return Vector::Constant(1, t[0] - 0.5); };
  p.constraints.jacobian = [](const Vector&) { return Matrix::Ones(1, 1); };
  p.critical = [c](const Vector&) { return c; };
  return p;
}

MomentModel mean_model(int k) {
  return MomentModel::separable(
      "mean", 0, k, Box(Vector::Constant(k, -10.0), Vector::Constant(k, 10.0)), [](const Matrix& x) { return x; },
      [](const Vector& t) { return t; }, [k](const Vector&) { return Matrix(Matrix::Identity(k, k)); });
}

Matrix normal_data(int n, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Matrix x(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) x(i, j) = 1.0 + (j + 1) * z(rng);
  return x;
}

}  // namespace

TEST_CASE("initial points") {
  Box box(Vector::Constant(3, -1.0), Vector::Constant(3, 2.0));
  Matrix a = initialize_points(box, 31, 4);
  CHECK(a.rows() == 31);
  for (int i = 0; i < 31; ++i) CHECK(box.contains(a.row(i).transpose()));
  CHECK(a == initialize_points(box, 31, 4));
  CHECK(a != initialize_points(box, 31, 5));

  // k defaults to 10 d + 1
  EamProblem p = toy_problem(0.0);
  p.box = box;
  p.objective = Objective::linear(Vector::Unit(3, 0));
  p.constraints.values = [](const Vector& t) { return Vector::Constant(1, t.sum()); };
  p.constraints.jacobian = [](const Vector&) { return Matrix::Ones(1, 3); };
  EamOptions opt;
  opt.max_iter = 0;
  CHECK(run_direction(p, opt).state.size() == 31);
}

TEST_CASE("expected improvement") {
  Matrix P(4, 1);
  P << 0.0, 0.3, 0.6, 1.0;
  Vector y(4);
  y << 1.0, 1.4, 0.8, 1.1;
  KrigingModel m = KrigingModel::fit_fixed(P, y, Vector::Constant(1, 0.05));
  Objective f = Objective::linear(Vector::Ones(1));
  Vector x = Vector::Constant(1, 0.45);
  KrigingPrediction pr = m.predict(x);
  REQUIRE(pr.s2 > 0.0);
  CHECK(expected_improvement(x, m, 0.45, pr.mean, f) == 0.0);
  CHECK(expected_improvement(x, m, 0.5, pr.mean, f) == 0.0);
  CHECK(expected_improvement(x, m, -0.55, pr.mean, f) == doctest::Approx(0.5));
  double s = std::sqrt(m.varsigma2_hat() * pr.s2);
  CHECK(expected_improvement(x, m, -0.55, pr.mean + 10.0 * s, f) <= 1e-15);
}

TEST_CASE("m-step fallbacks") {
  EamProblem p = toy_problem(0.0);
  p.constraints.values = [](const Vector&) { return Vector::Constant(1, -1.0); };
  p.constraints.jacobian = [](const Vector&) { return Matrix::Zero(1, 1); };
  EamState st;
  for (double t : {0.2, 0.7, 1.0}) st.add(Vector::Constant(1, t), 0.0, -1.0, t, 1e-9);
  KrigingModel m = KrigingModel::fit_fixed(st.points, st.cvals, Vector::Constant(1, 0.1));
  EamOptions opt;
  opt.epsilon = 0.0;
  // the incumbent sits on the top face, so nothing improves
  Proposal a = m_step(p, m, st, opt, 3);
  CHECK(a.random_draw);
  CHECK(a.ei == 0.0);
  CHECK(p.box.contains(a.theta));

  // epsilon = 1 always draws, reproducibly
  EamState low;
  for (double t : {0.1, 0.2}) low.add(Vector::Constant(1, t), 0.0, -1.0, t, 1e-9);
  KrigingModel ml = KrigingModel::fit_fixed(low.points, low.cvals, Vector::Constant(1, 0.1));
  opt.epsilon = 1.0;
  Proposal b = m_step(p, ml, low, opt, 7), c = m_step(p, ml, low, opt, 7);
  CHECK(b.random_draw);
  CHECK(b.theta == c.theta);
  CHECK(b.ei > 0.0);
}

TEST_CASE("one-dimensional toy reaches the constraint") {
  EamOptions opt;
  opt.seed = 11;
  EamResult r = run_direction(toy_problem(0.0), opt);
  REQUIRE_FALSE(r.empty);
  CHECK(r.converged);
  CHECK(std::abs(r.endpoint - 0.5) <= opt.conv_tol);
  CHECK(r.theta[0] <= 0.5 + 1e-9);
  double last = -kInf;
  for (const auto& h : r.state.history) {
    CHECK(h.incumbent >= last);
    last = h.incumbent;
  }
}

TEST_CASE("constant level on a scalar inequality") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  const int n = 200;
  Matrix x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = 0.3 + z(rng);
  // m = theta - X <= 0
  MomentModel model = MomentModel::separable(
      "upper", 1, 0, Box(Vector::Constant(1, -5.0), Vector::Constant(1, 5.0)), [](const Matrix& d) { return Matrix(-d); },
      [](const Vector& t) { return Vector(-t); }, [](const Vector&) { return Matrix(-Matrix::Identity(1, 1)); });
  MomentSample sample(model, x);
  CiOptions opt;
  opt.mode = CalibrationMode::constant;
  opt.constant = 1.64;
  opt.eam.seed = 5;
  CiResult ci = confidence_interval(sample, Vector::Ones(1), opt);
  double mean = x.mean();
  double sd = std::sqrt((x.array() - mean).square().mean());
  CHECK(std::abs(ci.upper - (mean + 1.64 * sd / std::sqrt(double(n)))) <= opt.eam.conv_tol);
  CHECK(std::abs(ci.lower - (-5.0)) <= opt.eam.conv_tol);

  // the reported optimum satisfies the constraint when re-evaluated
  SampleMoments sm = sample.moments(ci.upper_run.theta);
  CHECK(sm.outer.maxCoeff() <= 1.64 + 1e-9);
}

TEST_CASE("point-identified mean and the projection ordering") {
  const int n = 300;
  Matrix x = normal_data(n, 2, 8);
  MomentSample sample(mean_model(2), x);
  CiOptions opt;
  opt.B = 400;
  opt.seed = 21;
  opt.eam.seed = 22;
  Vector p = Vector::Unit(2, 0);
  CiResult cal = confidence_interval(sample, p, opt);
  opt.mode = CalibrationMode::as_projection;
  CiResult as = confidence_interval(sample, p, opt);

  const double mean = x.col(0).mean();
  const double sd = std::sqrt((x.col(0).array() - mean).square().mean());
  BootstrapEnsemble ens =
      bootstrap_ensemble(sample, Vector::Zero(2), BootstrapDraws::generate(n, opt.B, opt.bootstrap, opt.seed));
  // calibrated: the (1 - alpha) quantile of |G_1|; projection: of max_j |G_j|
  std::vector<double> one(opt.B), both(opt.B);
  for (int b = 0; b < opt.B; ++b) {
    one[b] = std::abs(ens.G(b, 0));
    both[b] = std::max(std::abs(ens.G(b, 0)), std::abs(ens.G(b, 1)));
  }
  std::sort(one.begin(), one.end());
  std::sort(both.begin(), both.end());
  const int k = quantile_rank(opt.B, 0.05) - 1;
  const double half_cal = one[k] * sd / std::sqrt(double(n)), half_as = both[k] * sd / std::sqrt(double(n));
  CHECK(std::abs(cal.lower - (mean - half_cal)) <= opt.eam.conv_tol);
  CHECK(std::abs(cal.upper - (mean + half_cal)) <= opt.eam.conv_tol);
  CHECK(std::abs(as.lower - (mean - half_as)) <= opt.eam.conv_tol);
  CHECK(std::abs(as.upper - (mean + half_as)) <= opt.eam.conv_tol);
  CHECK(as.lower <= cal.lower + opt.eam.conv_tol);
  CHECK(as.upper >= cal.upper - opt.eam.conv_tol);
}

TEST_CASE("bad options") {
  EamOptions opt;
  opt.epsilon = 1.5;
  CHECK_THROWS(run_direction(toy_problem(0.0), opt));
  opt.epsilon = 0.05;
  opt.conv_tol = 0.0;
  CHECK_THROWS(run_direction(toy_problem(0.0), opt));
}
