#include <benchmark/benchmark.h>

#include "calproj/critical_level.hpp"
#include "calproj/eam.hpp"
#include "calproj/entry_game.hpp"
#include "calproj/linprog.hpp"
#include "calproj/normal.hpp"
#include "calproj/surrogate.hpp"

#include <random>

using namespace calproj;

static void BM_BivariateNormal(benchmark::State& state) {
  double acc = 0.0, x = -1.3;
  for (auto _ : state) {
    acc += normal::bvn_cdf(x, 0.4, 0.6);
    x += 1e-9;
  }
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_BivariateNormal);

// Lambda systems look like this: a handful of rows in d <= 5 plus a box.
static void BM_Feasible(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0)), m = 16;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  LinearSystem sys;
  sys.A.resize(m, d);
  sys.b.resize(m);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < d; ++k) sys.A(i, k) = z(rng);
    sys.b[i] = 0.5 + z(rng);
  }
  sys.lower = Vector::Constant(d, -3.0);
  sys.upper = Vector::Constant(d, 3.0);
  for (auto _ : state) benchmark::DoNotOptimize(feasible(sys));
}
BENCHMARK(BM_Feasible)->Arg(2)->Arg(5)->Arg(9);

static void BM_CriticalLevelSet1(benchmark::State& state) {
  EntryGame g(EntryDgp::set1);
  MomentSample sample(g.moment_model(), g.simulate(1000, 3));
  const int B = static_cast<int>(state.range(0));
  BootstrapEnsemble ens =
      bootstrap_ensemble(sample, g.true_theta(), BootstrapDraws::generate(1000, B, BootstrapMode::multiplier, 4));
  CalibrationSettings s;
  s.rho = rho_from_eta(0.01, sample.model().J(), sample.model().dim());
  s.localization = Localization::hyperplane(Vector::Unit(5, 0));
  for (auto _ : state) benchmark::DoNotOptimize(critical_level(sample, g.true_theta(), 0.05, ens, s).value);
}
BENCHMARK(BM_CriticalLevelSet1)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_KrigingFit(benchmark::State& state) {
  const int d = 5, L = static_cast<int>(state.range(0));
  Box box(Vector::Zero(d), Vector::Ones(d));
  Matrix P = initialize_points(box, L, 2);
  Vector y(L);
  for (int i = 0; i < L; ++i) y[i] = std::sin(4.0 * P(i, 0)) + P.row(i).squaredNorm();
  KrigingOptions opt = KrigingOptions::for_box(box);
  for (auto _ : state) benchmark::DoNotOptimize(KrigingModel::fit(P, y, opt).log_likelihood());
}
BENCHMARK(BM_KrigingFit)->Arg(51)->Arg(150)->Unit(benchmark::kMillisecond);

static void BM_KrigingPredict(benchmark::State& state) {
  const int d = 5, L = 150;
  Box box(Vector::Zero(d), Vector::Ones(d));
  Matrix P = initialize_points(box, L, 2);
  Vector y(L);
  for (int i = 0; i < L; ++i) y[i] = std::sin(4.0 * P(i, 0)) + P.row(i).squaredNorm();
  KrigingModel m = KrigingModel::fit_fixed(P, y, Vector::Constant(d, 0.3));
  Vector x = Vector::Constant(d, 0.37);
  for (auto _ : state) benchmark::DoNotOptimize(m.predict(x).mean);
}
BENCHMARK(BM_KrigingPredict);

static void BM_EntryMoments(benchmark::State& state) {
  EntryGame g(EntryDgp::set2_dgp3);
  MomentSample sample(g.moment_model(), g.simulate(4000, 5));
  Vector th = g.true_theta();
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample.moments(th).outer.sum());
    benchmark::DoNotOptimize(sample.outer_jacobian(th).sum());
  }
}
BENCHMARK(BM_EntryMoments);

static void BM_ConfidenceIntervalSet1(benchmark::State& state) {
  EntryGame g(EntryDgp::set1);
  MomentSample sample(g.moment_model(), g.simulate(1000, 6));
  CiOptions opt;
  opt.B = 200;
  opt.seed = 7;
  opt.eam.seed = 8;
  for (auto _ : state) benchmark::DoNotOptimize(confidence_interval(sample, Vector::Unit(5, 0), opt).upper);
}
BENCHMARK(BM_ConfidenceIntervalSet1)->Unit(benchmark::kSecond)->Iterations(1);

BENCHMARK_MAIN();
