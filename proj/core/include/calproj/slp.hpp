#pragma once

#include "calproj/common.hpp"

#include <functional>

namespace calproj {

// Trust-region sequential linear programming for
//   maximize min_k f_k(x)  subject to  h_i(x) <= 0,  lower <= x <= upper,
// using the exact penalty merit min_k f_k - penalty * sum_i max(h_i, 0).
struct SlpProblem {
  Vector lower;
  Vector upper;
  // Fills piece values f, their gradients (rows), constraint values h and
  // gradients. Non-finite piece values mark x as unusable.
  std::function<void(const Vector& x, Vector& f, Matrix& df, Vector& h, Matrix& dh)> evaluate;
};

struct SlpOptions {
  // trust-region radius as a fraction of the box width
  double radius = 0.1;
  double min_radius = 1e-7;
  double max_radius = 0.5;
  int max_iter = 60;
  double penalty = 1e3;
  double tol = 1e-10;
};

struct SlpResult {
  Vector x;
  double merit = -kInf;
  int iterations = 0;
};

double slp_merit(const Vector& f, const Vector& h, double penalty);
SlpResult slp_maximize(const SlpProblem& problem, const Vector& x0, const SlpOptions& opt = {});

}  // namespace calproj
