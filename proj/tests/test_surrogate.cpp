#include "doctest.h"

#include "calproj/surrogate.hpp"

#include <cmath>
#include <random>

using namespace calproj;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }

Matrix uniform_points(int L, int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix P(L, d);
  for (int i = 0; i < L; ++i)
    for (int k = 0; k < d; ++k) P(i, k) = u(rng);
  return P;
}

double test_function(const Vector& x) { return std::sin(3.0 * x[0]) + x.squaredNorm() - 0.5 * x[x.size() - 1]; }

}  // namespace

TEST_CASE("kernels") {
  Vector beta = v1(1.0);
  CHECK(kernel_eval(Kernel::gaussian(), beta, v1(0.3), v1(0.3)) == 1.0);
  CHECK(kernel_eval(Kernel::matern(2.5), beta, v1(0.3), v1(0.3)) == 1.0);
  CHECK(kernel_eval(Kernel::gaussian(), beta, v1(0.0), v1(1.0)) == doctest::Approx(std::exp(-1.0)));

  // half-integer Matern closed forms
  for (double r : {0.05, 0.4, 1.0, 2.7}) {
    double u5 = std::sqrt(5.0) * r, u3 = std::sqrt(3.0) * r;
    double m52 = (1.0 + u5 + u5 * u5 / 3.0) * std::exp(-u5);
    double m32 = (1.0 + u3) * std::exp(-u3);
    CHECK(std::abs(kernel_eval(Kernel::matern(2.5), beta, v1(0.0), v1(r)) - m52) <= 1e-10);
    CHECK(std::abs(kernel_eval(Kernel::matern(1.5), beta, v1(0.0), v1(r)) - m32) <= 1e-10);
  }

  // gradients against central differences
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Kernel k : {Kernel::gaussian(), Kernel::matern(2.5), Kernel::matern(1.5)}) {
    for (int t = 0; t < 20; ++t) {
      Vector a(3), b(3), be(3);
      for (int i = 0; i < 3; ++i) {
        a[i] = u(rng);
        b[i] = u(rng);
        be[i] = 0.3 + std::abs(u(rng));
      }
      Vector g = kernel_gradient(k, be, a, b);
      for (int i = 0; i < 3; ++i) {
        Vector ap = a, am = a;
        ap[i] += 1e-6;
        am[i] -= 1e-6;
        double fd = (kernel_eval(k, be, ap, b) - kernel_eval(k, be, am, b)) / 2e-6;
        CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
      }
    }
  }
}

TEST_CASE("flat data") {
  Matrix P(2, 1);
  P << 0.0, 1.0;
  Vector y = Vector::Constant(2, 0.7);
  KrigingModel m = KrigingModel::fit_fixed(P, y, v1(0.5));
  CHECK(m.mu_hat() == doctest::Approx(0.7));
  CHECK(m.varsigma2_hat() == doctest::Approx(0.0).scale(1e-12));
  for (double x : {-1.0, 0.3, 0.9, 4.0}) CHECK(m.mean(v1(x)) == doctest::Approx(0.7));
}

TEST_CASE("generalised least squares quantities match a dense solve") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 25; ++t) {
    const int d = 1 + t % 3, L = 5 + t % 15;
    Matrix P = uniform_points(L, d, rng);
    Vector y(L);
    for (int i = 0; i < L; ++i) y[i] = test_function(P.row(i).transpose());
    Vector beta = Vector::Constant(d, 0.05 + 0.02 * (t % 4));
    KrigingModel m = KrigingModel::fit_fixed(P, y, beta);

    Matrix R(L, L);
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < L; ++j)
        R(i, j) = std::exp(-((P.row(i) - P.row(j)).array().square() / beta.transpose().array()).sum());
    R.diagonal().array() += m.nugget();
    Eigen::FullPivLU<Matrix> lu(R);
    Vector one = Vector::Ones(L);
    Vector Ri1 = lu.solve(one);
    double mu = Ri1.dot(y) / Ri1.sum();
    Vector e = y - mu * one;
    double s2 = e.dot(lu.solve(e)) / L;
    CHECK(m.mu_hat() == doctest::Approx(mu).epsilon(1e-8));
    CHECK(m.varsigma2_hat() == doctest::Approx(s2).epsilon(1e-8));

    Vector x(d);
    for (int k = 0; k < d; ++k) x[k] = 0.5;
    Vector r(L);
    for (int i = 0; i < L; ++i) r[i] = std::exp(-((x.transpose() - P.row(i)).array().square() / beta.transpose().array()).sum());
    double mean = mu + r.dot(lu.solve(e));
    double gap = 1.0 - Ri1.dot(r);
    double var = 1.0 - r.dot(lu.solve(r)) + gap * gap / Ri1.sum();
    KrigingPrediction pr = m.predict(x);
    CHECK(pr.mean == doctest::Approx(mean).epsilon(1e-8));
    CHECK(pr.s2 == doctest::Approx(var).epsilon(1e-6).scale(1e-6));
  }
}

TEST_CASE("fitted predictor interpolates and its gradients are exact") {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 10; ++t) {
    const int d = 2 + t % 2, L = 10 * d + 1;
    Matrix P = uniform_points(L, d, rng);
    Vector y(L);
    for (int i = 0; i < L; ++i) y[i] = test_function(P.row(i).transpose());
    Box box(Vector::Zero(d), Vector::Ones(d));
    KrigingOptions opt = KrigingOptions::for_box(box);
    opt.seed = t;
    KrigingModel m = KrigingModel::fit(P, y, opt);
    for (int i = 0; i < L; ++i) {
      KrigingPrediction pr = m.predict(P.row(i).transpose());
      CHECK(std::abs(pr.mean - y[i]) <= 1e-6);
      CHECK(pr.s2 <= 1e-6);
      CHECK(pr.grad_mean.allFinite());
    }
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int s = 0; s < 10; ++s) {
      Vector x(d);
      for (int k = 0; k < d; ++k) x[k] = u(rng);
      KrigingPrediction pr = m.predict(x);
      CHECK(pr.s2 >= 0.0);
      for (int k = 0; k < d; ++k) {
        Vector xp = x, xm = x;
        const double h = 1e-6;
        xp[k] += h;
        xm[k] -= h;
        double fd = (m.mean(xp) - m.mean(xm)) / (2 * h);
        double fs = (m.predict(xp, false).s2 - m.predict(xm, false).s2) / (2 * h);
        CHECK(std::abs(pr.grad_mean[k] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
        CHECK(std::abs(pr.grad_s2[k] - fs) <= 1e-5 * std::max(1.0, std::abs(fs)));
      }
    }
  }
}

TEST_CASE("limits, shifts and permutations") {
  std::mt19937_64 rng(5);
  const int L = 12, d = 2;
  Matrix P = uniform_points(L, d, rng);
  Vector y(L);
  for (int i = 0; i < L; ++i) y[i] = test_function(P.row(i).transpose());
  Vector beta = Vector::Constant(d, 0.08);
  KrigingModel m = KrigingModel::fit_fixed(P, y, beta);

  // far from every site the predictor reverts to the GLS mean
  Vector far = Vector::Constant(d, 50.0);
  KrigingPrediction pf = m.predict(far);
  CHECK(pf.mean == doctest::Approx(m.mu_hat()));
  Matrix R(L, L);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) R(i, j) = kernel_eval(Kernel::gaussian(), beta, P.row(i).transpose(), P.row(j).transpose());
  R.diagonal().array() += m.nugget();
  double one_r_one = Eigen::FullPivLU<Matrix>(R).solve(Vector::Ones(L)).sum();
  CHECK(pf.s2 == doctest::Approx(1.0 + 1.0 / one_r_one));

  // shifting the values shifts the predictor and leaves s2 alone
  KrigingModel shifted = KrigingModel::fit_fixed(P, (y.array() + 3.25).matrix(), beta);
  Vector x = Vector::Constant(d, 0.41);
  CHECK(shifted.predict(x).mean == doctest::Approx(m.predict(x).mean + 3.25).epsilon(1e-12));
  CHECK(shifted.predict(x).s2 == doctest::Approx(m.predict(x).s2).epsilon(1e-12));

  // point order does not matter
  Matrix Pr = P.colwise().reverse();
  Vector yr = y.reverse();
  KrigingModel rev = KrigingModel::fit_fixed(Pr, yr, beta);
  for (double c : {0.1, 0.5, 0.77}) {
    Vector q = Vector::Constant(d, c);
    CHECK(std::abs(rev.predict(q).mean - m.predict(q).mean) <= 1e-10);
    CHECK(std::abs(rev.predict(q).s2 - m.predict(q).s2) <= 1e-10);
  }
}

TEST_CASE("duplicate points are merged") {
  Matrix P(3, 1);
  P << 0.1, 0.5, 0.1;
  Vector y(3);
  y << 1.0, 2.0, 1.0;
  Matrix Q;
  Vector z;
  merge_duplicates(P, y, Q, z);
  CHECK(Q.rows() == 2);
  CHECK_THROWS(KrigingModel::fit_fixed(P.topRows(1), y.head(1), v1(0.5)));
}
