#pragma once

// Test-only oracles and fixtures. Nothing here calls into the code under test
// except to build inputs.

#include "calproj/common.hpp"
#include "calproj/linprog.hpp"
#include "calproj/moment_model.hpp"

#include <Eigen/LU>

#include <cmath>
#include <random>
#include <vector>

namespace calproj::testing {

// Brute force over every basis of d active rows (A rows and box faces).
// Requires finite bounds so the region is a polytope.
struct VertexOracle {
  bool feasible = false;
  double value = -kInf;
  Vector argmax;
};

inline VertexOracle vertex_enumeration(const Vector& c, const LinearSystem& sys, double tol = 1e-9) {
  const int d = sys.dim();
  const int m = sys.rows();
  Matrix rows(m + 2 * d, d);
  Vector rhs(m + 2 * d);
  rows.topRows(m) = sys.A;
  rhs.head(m) = sys.b;
  for (int k = 0; k < d; ++k) {
    rows.row(m + 2 * k).setZero();
    rows(m + 2 * k, k) = 1.0;
    rhs[m + 2 * k] = sys.upper[k];
    rows.row(m + 2 * k + 1).setZero();
    rows(m + 2 * k + 1, k) = -1.0;
    rhs[m + 2 * k + 1] = -sys.lower[k];
  }
  const int total = static_cast<int>(rows.rows());
  VertexOracle out;
  std::vector<int> pick(d);
  for (int i = 0; i < d; ++i) pick[i] = i;
  while (true) {
    Matrix S(d, d);
    Vector r(d);
    for (int i = 0; i < d; ++i) {
      S.row(i) = rows.row(pick[i]);
      r[i] = rhs[pick[i]];
    }
    Eigen::FullPivLU<Matrix> lu(S);
    if (lu.rank() == d) {
      Vector x = lu.solve(r);
      bool ok = true;
      for (int i = 0; i < total && ok; ++i) {
        double scale = std::max(1.0, rows.row(i).cwiseAbs().maxCoeff());
        if (rows.row(i).dot(x) - rhs[i] > tol * scale) ok = false;
      }
      if (ok) {
        out.feasible = true;
        double v = c.dot(x);
        if (v > out.value) {
          out.value = v;
          out.argmax = x;
        }
      }
    }
    int i = d - 1;
    while (i >= 0 && pick[i] == total - d + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int k = i + 1; k < d; ++k) pick[k] = pick[k - 1] + 1;
  }
  return out;
}

// m_j = a_j'theta - X_j with Gaussian data whose means put theta0 strictly
// inside the inequalities by `slack`.
struct LinearFixture {
  Matrix A;
  Matrix data;
  Vector theta0;
  int J1 = 0;
  int J2 = 0;
  Box box;

  MomentModel model() const {
    Matrix a = A;
    return MomentModel::separable(
        "linear-fixture", J1, J2, box, [](const Matrix& x) { return Matrix(-x); },
        [a](const Vector& t) { return Vector(-a * t); }, [a](const Vector&) { return Matrix(-a); });
  }
};

inline LinearFixture random_linear_fixture(std::mt19937_64& rng, int d, int J1, int J2, int n, double slack = 0.5,
                                           double noise = 1.0) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  LinearFixture f;
  f.J1 = J1;
  f.J2 = J2;
  f.A.resize(J1 + J2, d);
  for (int i = 0; i < f.A.rows(); ++i) {
    for (int k = 0; k < d; ++k) f.A(i, k) = z(rng);
    f.A.row(i) /= f.A.row(i).norm();
  }
  f.theta0.resize(d);
  for (int k = 0; k < d; ++k) f.theta0[k] = u(rng);
  f.box = Box(Vector::Constant(d, -2.0), Vector::Constant(d, 2.0));
  f.data.resize(n, J1 + J2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < J1 + J2; ++j)
      f.data(i, j) = f.A.row(j).dot(f.theta0) + (j < J1 ? slack : 0.0) + noise * z(rng);
  return f;
}

}  // namespace calproj::testing
