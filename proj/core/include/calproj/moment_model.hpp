#pragma once

#include "calproj/common.hpp"

#include <functional>
#include <string>

namespace calproj {

// Generalised moment selection functions, written for moments of the form
// E[m] <= 0. xi >= 0 means "looks binding"; -inf drops the row.
enum class GmsKind {
  hard_threshold,    // 0 if xi >= -1, else -inf
  smooth_threshold,  // 0 on [-1, inf), (xi+1)/(xi+2) on (-2,-1), -inf below
  truncated_linear,  // min(xi, 0)
  linear,            // xi
};

enum class KappaRule { sqrt_log_n, n_pow_one_seventh, sqrt_log_log_n };

struct GmsConfig {
  GmsKind kind = GmsKind::hard_threshold;
  KappaRule rule = KappaRule::sqrt_log_n;
  // Overrides the rule when positive.
  double kappa = 0.0;

  double kappa_for(int n) const;
  bool smooth() const { return kind != GmsKind::hard_threshold; }
};

double gms_function(GmsKind kind, double xi);

// Moment (in)equality model E[m_j(X, theta)] <= 0 for j < J1 and = 0 for the
// next J2 indices. Equalities are mirrored internally, giving J = J1 + 2 J2
// rows; row J1 + J2 + k is the negation of row J1 + k.
//
// Two forms are supported. A general model supplies the n x (J1+J2) matrix of
// moment contributions at theta. A separable model has m_j = h_j(X) - v_j(theta);
// its sample standard deviations and bootstrap ensemble do not depend on theta.
class MomentModel {
 public:
  using MomentFn = std::function<Matrix(const Matrix& data, const Vector& theta)>;
  // Gradient of the population moment mean, (J1+J2) x d, evaluated at theta.
  using GradientFn = std::function<Matrix(const Matrix& data, const Vector& theta)>;
  using DataFn = std::function<Matrix(const Matrix& data)>;
  using ThetaFn = std::function<Vector(const Vector& theta)>;
  using JacobianFn = std::function<Matrix(const Vector& theta)>;

  static MomentModel general(std::string name, int J1, int J2, Box box, MomentFn moments,
                             GradientFn gradient = {}, int paired = 0);
  static MomentModel separable(std::string name, int J1, int J2, Box box, DataFn h, ThetaFn v,
                               JacobianFn v_jacobian = {}, int paired = 0);

  const std::string& name() const { return name_; }
  int dim() const { return box_.dim(); }
  int J1() const { return J1_; }
  int J2() const { return J2_; }
  int J() const { return J1_ + 2 * J2_; }
  int base_count() const { return J1_ + J2_; }
  // R1: inequalities j and j + R1 (j < R1) are paired.
  int paired() const { return paired_; }
  const Box& box() const { return box_; }
  bool is_separable() const { return static_cast<bool>(h_); }
  bool has_gradient() const { return is_separable() ? static_cast<bool>(dv_) : static_cast<bool>(gradient_); }

  Matrix contributions(const Matrix& data, const Vector& theta) const;
  Matrix data_part(const Matrix& data) const { return h_(data); }
  Vector theta_part(const Vector& theta) const { return v_(theta); }
  Matrix mean_gradient(const Matrix& data, const Vector& theta) const;

 private:
  MomentModel() = default;
  void validate() const;

  std::string name_;
  int J1_ = 0, J2_ = 0, paired_ = 0;
  Box box_;
  MomentFn moments_;
  GradientFn gradient_;
  DataFn h_;
  ThetaFn v_;
  JacobianFn dv_;
};

// Sample moment summaries at one theta. Vectors have J entries, equalities
// mirrored.
struct SampleMoments {
  int n = 0;
  int J1 = 0;
  int J2 = 0;
  Vector mbar;
  Vector sigma;
  // sqrt(n) mbar / sigma
  Vector studentized;
  // pair weights mu_j for j < R1 (mu_{j+R1} = 1 - mu_j)
  Vector pair_weight;
  // sigma with paired rows replaced by the pooled sigma^M
  Vector sigma_outer;
  // sqrt(n) mbar / sigma_outer; the constraint values used for the outer problem
  Vector outer;
};

// A model bound to a data set. Caches theta-free quantities for separable models.
class MomentSample {
 public:
  MomentSample(MomentModel model, Matrix data);

  const MomentModel& model() const { return model_; }
  const Matrix& data() const { return data_; }
  int n() const { return static_cast<int>(data_.rows()); }

  SampleMoments moments(const Vector& theta) const;
  // n x (J1+J2) matrix of (m_ij - mbar_j) / sigma_j.
  Matrix centered(const Vector& theta) const;
  // Studentized gradient estimate D_hat, J x d.
  Matrix gradients(const Vector& theta) const;
  // Jacobian of the outer constraint values, J x d.
  Matrix outer_jacobian(const Vector& theta) const;

 private:
  Matrix raw_gradient(const Vector& theta, const SampleMoments& sm) const;

  MomentModel model_;
  Matrix data_;
  // separable cache
  Vector h_mean_;
  Vector h_sigma_;
  Matrix h_centered_;
};

SampleMoments studentized_moments(const MomentModel& model, const Matrix& data, const Vector& theta);
Vector xi_hat(const SampleMoments& sm, double kappa);
Vector gms_apply(const GmsConfig& gms, const Vector& xi, int J1);
Matrix estimate_gradients(const MomentModel& model, const Matrix& data, const Vector& theta);

}  // namespace calproj
