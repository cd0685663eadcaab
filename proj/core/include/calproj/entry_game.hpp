#pragma once

#include "calproj/common.hpp"
#include "calproj/moment_model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace calproj {

enum class EntryDgp { set1, set2_dgp1, set2_dgp2, set2_dgp3 };

EntryDgp parse_entry_dgp(const std::string& name);
std::string entry_dgp_name(EntryDgp dgp);

// Outcome probabilities for one covariate value. upper01 is the mass of the
// region where (0,1) is an equilibrium; mult is the multiplicity region.
struct EntryCell {
  double p00 = 0, p11 = 0, upper01 = 0, mult = 0;
  double p01(double mu) const { return upper01 - (1.0 - mu) * mult; }
  double p10(double mu) const { return 1.0 - p00 - p11 - p01(mu); }
};

// Two-player entry game with a finite covariate support. Data are rows
// (y1, y2, z) with z the support index. Moments, in order:
//   J1: (0,1) upper bound for each z, then the (0,1) lower bound for each z
//       (pairs j, j + |Z|);
//   J2: (0,0) equality for each z (normal shocks only), then (1,1) for each z.
class EntryGame {
 public:
  explicit EntryGame(EntryDgp dgp);

  EntryDgp dgp() const { return dgp_; }
  int dim() const;
  int support_size() const { return 4; }
  const Vector& support_probs() const { return pz_; }
  double mu() const { return mu_; }
  const Vector& true_theta() const { return theta0_; }
  Box box() const;
  std::vector<std::string> parameter_names() const;
  bool uniform_shocks() const { return dgp_ == EntryDgp::set1; }
  int J1() const { return 8; }
  int J2() const { return uniform_shocks() ? 4 : 8; }

  EntryCell cell(const Vector& theta, int z) const;
  // theta-dependent moment part v(theta) and its Jacobian, (J1+J2) and (J1+J2) x d.
  Vector model_part(const Vector& theta) const;
  Matrix model_part_jacobian(const Vector& theta) const;
  // n x (J1+J2) matrix of outcome indicators (signed as in the moments).
  Matrix data_part(const Matrix& data) const;
  // E[m(X, theta)] under the data-generating theta.
  Vector population_moments(const Vector& theta) const;
  MomentModel moment_model() const;

  Matrix simulate(int n, std::uint64_t seed) const;

  // Published projections of the identified set, per component when known.
  std::vector<std::optional<std::pair<double, double>>> true_bounds() const;

 private:
  struct Index {
    double a1, b1, a2, b2, r;
    Eigen::Matrix<double, 5, Eigen::Dynamic> jac;
  };
  Index index(const Vector& theta, int z) const;
  // cell probabilities and their gradient with respect to (a1, b1, a2, b2, r)
  void cell_with_gradient(const Index& ix, EntryCell& c, Eigen::Matrix<double, 4, 5>* grad) const;

  EntryDgp dgp_;
  Vector pz_;
  Vector theta0_;
  double mu_ = 0.5;
  double r_fixed_ = 0.0;
};

}  // namespace calproj
