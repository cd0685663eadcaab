#pragma once

#include "calproj/common.hpp"

namespace calproj {

// { x : A x <= b, lower <= x <= upper }. Bounds may be infinite; rows with
// b = +inf are ignored.
struct LinearSystem {
  Matrix A;
  Vector b;
  Vector lower;
  Vector upper;

  int rows() const { return static_cast<int>(A.rows()); }
  int dim() const { return static_cast<int>(A.cols()); }
  // Largest violation of any row or bound at x (0 when x is feasible).
  double max_violation(const Vector& x) const;
};

class SimplexStallError : public Error {
 public:
  SimplexStallError() : Error("simplex stall") {}
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  double value = 0.0;
  Vector x;
  int pivots = 0;
};

struct SimplexOptions {
  double feasibility_tol = 1e-9;
  double pivot_tol = 1e-11;
  // 0 selects the default cap of 10 (m + d)^2 pivots per phase.
  long max_pivots = 0;
};

// Is the polyhedron non-empty?
bool feasible(const LinearSystem& sys, const SimplexOptions& opt = {});
// A point of the polyhedron, or status infeasible.
LpResult find_feasible_point(const LinearSystem& sys, const SimplexOptions& opt = {});
// max c'x over the polyhedron.
LpResult maximize(const Vector& c, const LinearSystem& sys, const SimplexOptions& opt = {});

}  // namespace calproj
