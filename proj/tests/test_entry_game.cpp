#include "doctest.h"

#include "calproj/entry_game.hpp"

#include <cmath>
#include <random>

using namespace calproj;

namespace {

const EntryDgp kAll[] = {EntryDgp::set1, EntryDgp::set2_dgp1, EntryDgp::set2_dgp2, EntryDgp::set2_dgp3};

Vector random_in(const Box& box, std::mt19937_64& rng, double margin = 0.0) {
  std::uniform_real_distribution<double> u(margin, 1.0 - margin);
  Vector x(box.dim());
  for (int k = 0; k < box.dim(); ++k) x[k] = box.lower[k] + u(rng) * (box.upper[k] - box.lower[k]);
  return x;
}

// Competitive effects z'Delta <= 0 at every support point; the box alone
// does not impose this for the normal designs.
bool competitive(const EntryGame& g, const Vector& th) {
  if (g.uniform_shocks()) return true;
  for (double s : {-1.0, 1.0})
    if (th[4] + s * th[5] > 0.0 || th[6] + s * th[7] > 0.0) return false;
  return true;
}

Vector random_game_point(const EntryGame& g, std::mt19937_64& rng, double margin = 0.0) {
  Vector th;
  do th = random_in(g.box(), rng, margin);
  while (!competitive(g, th));
  return th;
}

// Largest violation of the population constraints at theta.
double violation(const EntryGame& g, const Vector& theta) {
  Vector m = g.population_moments(theta);
  double v = m.head(g.J1()).maxCoeff();
  return std::max(v, m.tail(g.J2()).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("dgp names") {
  for (EntryDgp d : kAll) CHECK(parse_entry_dgp(entry_dgp_name(d)) == d);
  CHECK_THROWS(parse_entry_dgp("set3"));
  CHECK(EntryGame(EntryDgp::set1).dim() == 5);
  CHECK(EntryGame(EntryDgp::set2_dgp2).dim() == 8);
  CHECK(EntryGame(EntryDgp::set2_dgp3).dim() == 9);
}

TEST_CASE("outcome probabilities partition the shock space") {
  std::mt19937_64 rng(1);
  for (EntryDgp d : kAll) {
    EntryGame g(d);
    for (int t = 0; t < 200; ++t) {
      Vector th = random_game_point(g, rng);
      for (int z = 0; z < 4; ++z) {
        EntryCell c = g.cell(th, z);
        double p01 = c.p01(g.mu()), p10 = c.p10(g.mu());
        for (double p : {c.p00, c.p11, p01, p10}) {
          CHECK(p >= -1e-12);
          CHECK(p <= 1.0 + 1e-12);
        }
        CHECK(std::abs(c.p00 + c.p11 + p01 + p10 - 1.0) <= 1e-12);
        CHECK(c.mult <= c.upper01 + 1e-12);
      }
    }
  }
}

TEST_CASE("true parameters lie in the identified set") {
  for (EntryDgp d : kAll) {
    EntryGame g(d);
    Vector m = g.population_moments(g.true_theta());
    CHECK(m.head(g.J1()).maxCoeff() <= 1e-12);
    CHECK(m.tail(g.J2()).cwiseAbs().maxCoeff() <= 1e-12);
  }
  Vector th(5);
  th << 0.4, 0.6, 0.1, 0.2, 0.3;
  EntryGame s1(EntryDgp::set1);
  CHECK(s1.true_theta() == th);
  CHECK(s1.mu() == doctest::Approx(0.6));
}

TEST_CASE("point identification of the first normal design") {
  EntryGame g(EntryDgp::set2_dgp1);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  for (int t = 0; t < 200; ++t) {
    Vector u(g.dim());
    for (int k = 0; k < g.dim(); ++k) u[k] = z(rng);
    Vector th = g.true_theta() + 1e-3 * u / u.norm();
    CHECK(violation(g, th) > 1e-9);
  }
}

TEST_CASE("simulated frequencies") {
  EntryGame g(EntryDgp::set2_dgp1);
  const int n = 100000;
  Matrix data = g.simulate(n, 5);
  for (int z = 0; z < 4; ++z) {
    EntryCell c = g.cell(g.true_theta(), z);
    double count = 0, f[2][2] = {{0, 0}, {0, 0}};
    for (int i = 0; i < n; ++i)
      if (std::lround(data(i, 2)) == z) {
        ++count;
        f[std::lround(data(i, 0))][std::lround(data(i, 1))] += 1.0;
      }
    CHECK(std::abs(count / n - g.support_probs()[z]) <= 0.01);
    CHECK(std::abs(f[0][0] / count - c.p00) <= 0.01);
    CHECK(std::abs(f[1][1] / count - c.p11) <= 0.01);
    CHECK(std::abs(f[0][1] / count - c.p01(g.mu())) <= 0.01);
    CHECK(std::abs(f[1][0] / count - c.p10(g.mu())) <= 0.01);
  }
  CHECK(g.simulate(50, 9) == g.simulate(50, 9));
}

TEST_CASE("paired rows differ by a nonnegative slack") {
  std::mt19937_64 rng(6);
  for (EntryDgp d : kAll) {
    EntryGame g(d);
    Matrix data = g.simulate(100, 3);
    MomentModel mm = g.moment_model();
    CHECK(mm.paired() == 4);
    for (int t = 0; t < 100; ++t) {
      Vector th = random_game_point(g, rng);
      Matrix m = mm.contributions(data, th);
      for (int j = 0; j < 4; ++j) {
        Vector slack = -m.col(j) - m.col(j + 4);
        CHECK(slack.minCoeff() >= -1e-12);
      }
    }
  }
}

TEST_CASE("analytic jacobian against central differences") {
  std::mt19937_64 rng(7);
  for (EntryDgp d : kAll) {
    EntryGame g(d);
    for (int t = 0; t < 50; ++t) {
      Vector th = random_game_point(g, rng, 0.05);
      Matrix J = g.model_part_jacobian(th);
      Matrix fd(J.rows(), J.cols());
      for (int k = 0; k < g.dim(); ++k) {
        const double h = 1e-6;
        Vector a = th, b = th;
        a[k] += h;
        b[k] -= h;
        fd.col(k) = (g.model_part(a) - g.model_part(b)) / (2 * h);
      }
      for (int i = 0; i < J.rows(); ++i)
        for (int k = 0; k < J.cols(); ++k)
          CHECK(std::abs(fd(i, k) - J(i, k)) <= 1e-5 * std::max(1.0, std::abs(fd(i, k))));
    }
  }
}

TEST_CASE("uniform design gradient signs") {
  EntryGame g(EntryDgp::set1);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 50; ++t) {
    Vector th = random_in(g.box(), rng, 0.05);
    Matrix J = g.model_part_jacobian(th);
    for (int z = 0; z < 4; ++z) {
      // (0,1) upper bound rises with player 1's competitive effect
      CHECK(J(z, 0) >= 0.0);
      // (1,1) falls as either competitive effect grows
      CHECK(J(8 + z, 0) <= 0.0);
      CHECK(J(8 + z, 1) <= 0.0);
    }
  }
}

TEST_CASE("published bounds") {
  auto b = EntryGame(EntryDgp::set1).true_bounds();
  REQUIRE(b.size() == 5);
  REQUIRE(b[0].has_value());
  CHECK(b[0]->first == doctest::Approx(0.3872));
  CHECK(b[0]->second == doctest::Approx(0.4239));
  auto p = EntryGame(EntryDgp::set2_dgp1).true_bounds();
  for (int k = 0; k < 8; ++k) {
    REQUIRE(p[k].has_value());
    CHECK(p[k]->first == p[k]->second);
  }
  CHECK_THROWS(EntryGame(EntryDgp::set1).data_part(Matrix::Constant(1, 3, 5.0)));
}
