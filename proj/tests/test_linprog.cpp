#include "doctest.h"

#include "calproj/linprog.hpp"
#include "calproj/normal.hpp"
#include "support.hpp"

#include <cmath>
#include <random>

using namespace calproj;

namespace {

LinearSystem square(const Matrix& A, const Vector& b) {
  return {A, b, Vector::Constant(A.cols(), -1.0), Vector::Constant(A.cols(), 1.0)};
}

// Simpson on [-8, x] of phi(t) Phi((y - r t) / sqrt(1 - r^2)).
double bvn_quadrature(double x, double y, double r) {
  const double s = std::sqrt(1.0 - r * r);
  const double lo = -8.0;
  if (x <= lo) return 0.0;
  const int n = 4000;
  const double h = (x - lo) / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    double t = lo + i * h;
    double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * normal::pdf(t) * normal::cdf((y - r * t) / s);
  }
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("normal helpers") {
  CHECK(normal::cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal::quantile(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
  CHECK(normal::quantile(normal::cdf(-3.3)) == doctest::Approx(-3.3).epsilon(1e-10));
  CHECK(std::isinf(normal::quantile(0.0)));
  // far tail stays finite in log space
  CHECK(normal::log_cdf(-40.0) == doctest::Approx(-804.6084420137538).epsilon(1e-9));
  CHECK(normal::mills_ratio(0.0) == doctest::Approx(2.0 * normal::pdf(0.0)));
}

TEST_CASE("bivariate normal cdf against quadrature") {
  for (double r : {-0.9, -0.5, 0.0, 0.3, 0.75, 0.95})
    for (double x : {-2.0, -0.3, 0.0, 1.1})
      for (double y : {-1.5, 0.2, 2.4}) {
        CAPTURE(r);
        CAPTURE(x);
        CAPTURE(y);
        CHECK(normal::bvn_cdf(x, y, r) == doctest::Approx(bvn_quadrature(x, y, r)).epsilon(1e-7));
      }
  CHECK(normal::bvn_cdf(0.4, -0.2, 0.0) == doctest::Approx(normal::cdf(0.4) * normal::cdf(-0.2)));
  CHECK(normal::bvn_cdf(0.0, 0.0, 0.5) == doctest::Approx(0.25 + std::asin(0.5) / (2 * M_PI)));
}

TEST_CASE("feasibility of small systems") {
  Matrix A(1, 2);
  A << 1, 1;
  CHECK_FALSE(feasible(square(A, Vector::Constant(1, -3.0))));
  CHECK(feasible(square(A, Vector::Constant(1, 0.0))));
  // rows with b = +inf are ignored
  CHECK(feasible(square(A, Vector::Constant(1, kInf))));
}

TEST_CASE("maximize reaches the binding row") {
  Matrix A(1, 2);
  A << 1, 0;
  LpResult r = maximize(Vector::Unit(2, 0), square(A, Vector::Constant(1, 0.5)));
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.value == doctest::Approx(0.5));
  CHECK(r.x[0] == doctest::Approx(0.5));

  Matrix B(1, 2);
  B << 1, 1;
  CHECK(maximize(Vector::Unit(2, 1), square(B, Vector::Constant(1, -3.0))).status == LpStatus::infeasible);

  LinearSystem open{Matrix::Zero(0, 1), Vector(0), Vector::Constant(1, 0.0), Vector::Constant(1, kInf)};
  CHECK(maximize(Vector::Ones(1), open).status == LpStatus::unbounded);
}

TEST_CASE("lp invariants on random systems") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> pos(0.1, 5.0);
  for (int t = 0; t < 500; ++t) {
    const int d = 1 + t % 3, m = 1 + t % 8;
    LinearSystem sys;
    sys.A.resize(m, d);
    sys.b.resize(m);
    for (int i = 0; i < m; ++i) {
      for (int k = 0; k < d; ++k) sys.A(i, k) = z(rng);
      sys.b[i] = z(rng);
    }
    sys.lower = Vector::Constant(d, -2.0);
    sys.upper = Vector::Constant(d, 2.0);
    const bool f = feasible(sys);

    // feasible iff maximize(0) has a value
    CHECK(f == (maximize(Vector::Zero(d), sys).status == LpStatus::optimal));

    // loosening b keeps feasibility
    LinearSystem loose = sys;
    for (int i = 0; i < m; ++i) loose.b[i] += std::abs(z(rng));
    if (f) CHECK(feasible(loose));

    // positive row scaling leaves the verdict alone
    LinearSystem scaled = sys;
    for (int i = 0; i < m; ++i) {
      double s = pos(rng);
      scaled.A.row(i) *= s;
      scaled.b[i] *= s;
    }
    CHECK(feasible(scaled) == f);

    // returned points are feasible
    LpResult p = find_feasible_point(sys);
    if (f) {
      REQUIRE(p.status == LpStatus::optimal);
      CHECK(sys.max_violation(p.x) <= 1e-8);
    }

    Vector c(d);
    for (int k = 0; k < d; ++k) c[k] = z(rng);
    auto oracle = testing::vertex_enumeration(c, sys);
    LpResult r = maximize(c, sys);
    REQUIRE((r.status == LpStatus::optimal) == oracle.feasible);
    if (oracle.feasible) CHECK(std::abs(r.value - oracle.value) <= 1e-8);
  }
}
