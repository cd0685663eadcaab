#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>

namespace calproj {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A moment has zero sample variance, so it cannot be studentized.
class DegenerateMomentError : public Error {
 public:
  explicit DegenerateMomentError(int j)
      : Error("degenerate moment " + std::to_string(j)), moment(j) {}
  int moment;
};

// Axis-aligned parameter box.
struct Box {
  Vector lower;
  Vector upper;

  Box() = default;
  Box(Vector lo, Vector hi);

  int dim() const { return static_cast<int>(lower.size()); }
  Vector width() const { return upper - lower; }
  Vector center() const { return 0.5 * (lower + upper); }
  bool contains(const Vector& x, double tol = 0.0) const;
  Vector clamp(const Vector& x) const;
};

inline Box::Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) throw Error("box bounds differ in dimension");
  for (int k = 0; k < lower.size(); ++k)
    if (!(lower[k] <= upper[k])) throw Error("box lower bound exceeds upper bound");
}

inline bool Box::contains(const Vector& x, double tol) const {
  if (x.size() != lower.size()) return false;
  for (int k = 0; k < x.size(); ++k)
    if (x[k] < lower[k] - tol || x[k] > upper[k] + tol) return false;
  return true;
}

inline Vector Box::clamp(const Vector& x) const {
  return x.cwiseMax(lower).cwiseMin(upper);
}

}  // namespace calproj
