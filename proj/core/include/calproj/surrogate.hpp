#pragma once

#include "calproj/common.hpp"

#include <Eigen/Cholesky>

#include <cstdint>

namespace calproj {

enum class KernelKind { gaussian, matern };

// Correlation kernels on the weighted distance r^2 = sum_k (a_k - b_k)^2 / beta_k.
struct Kernel {
  KernelKind kind = KernelKind::gaussian;
  double nu = 2.5;

  static Kernel gaussian() { return {}; }
  static Kernel matern(double nu) { return {KernelKind::matern, nu}; }
};

double kernel_eval(const Kernel& k, const Vector& beta, const Vector& a, const Vector& b);
// Gradient of kernel_eval with respect to a.
Vector kernel_gradient(const Kernel& k, const Vector& beta, const Vector& a, const Vector& b);

class IllConditionedError : public Error {
 public:
  IllConditionedError() : Error("ill-conditioned surrogate") {}
};

struct KrigingOptions {
  Kernel kernel;
  Vector beta_lower;
  Vector beta_upper;
  int starts = 8;
  int max_evaluations = 200;
  // initial pattern-search step in log(beta)
  double initial_step = 1.0;
  double nugget = 1e-10;
  double max_nugget = 1e-6;
  // beta values whose nugget-induced interpolation error exceeds this times
  // (1 + max|values|) are rejected unless no candidate meets it
  double interpolation_tol = 1e-8;
  std::uint64_t seed = 0;

  // Bounds 0.01 and 10 times the box widths.
  static KrigingOptions for_box(const Box& box, Kernel kernel = Kernel::gaussian());
};

struct KrigingPrediction {
  double mean = 0.0;
  // unit-variance predictive variance; multiply by varsigma2 for the scale
  double s2 = 0.0;
  Vector grad_mean;
  Vector grad_s2;
};

class KrigingModel {
 public:
  // Concentrated maximum likelihood over beta within the option bounds.
  // A non-empty beta_start is used as the first start.
  static KrigingModel fit(const Matrix& points, const Vector& values, const KrigingOptions& opt,
                          const Vector& beta_start = Vector());
  static KrigingModel fit_fixed(const Matrix& points, const Vector& values, const Vector& beta,
                                const Kernel& kernel = Kernel::gaussian(), double nugget = 1e-10,
                                double max_nugget = 1e-6);

  KrigingPrediction predict(const Vector& theta, bool with_gradient = true) const;
  double mean(const Vector& theta) const;
  // Concentrated log-likelihood at beta for the stored data.
  double log_likelihood() const { return loglik_; }

  const Matrix& points() const { return points_; }
  const Vector& values() const { return values_; }
  const Vector& beta() const { return beta_; }
  const Kernel& kernel() const { return kernel_; }
  double mu_hat() const { return mu_; }
  double varsigma2_hat() const { return varsigma2_; }
  double nugget() const { return nugget_; }
  // max_l |c_L(theta_l) - values_l|, the residual left by the nugget
  double interpolation_error() const { return interp_error_; }
  // interpolation_error() relative to 1 + max|values|
  double relative_interpolation_error() const;
  int size() const { return static_cast<int>(points_.rows()); }
  int evaluations() const { return evaluations_; }

 private:
  // Factorizes R at beta and fills the GLS quantities; false if not PD.
  bool build(const Vector& beta, double nugget, double max_nugget);

  Matrix points_;
  Vector values_;
  Vector beta_;
  Kernel kernel_;
  double nugget_ = 0.0;
  Eigen::LLT<Matrix> llt_;
  Vector alpha_;  // R^-1 (values - mu 1)
  Vector w1_;     // R^-1 1
  double one_w1_ = 0.0;
  double mu_ = 0.0;
  double varsigma2_ = 0.0;
  double loglik_ = -kInf;
  double interp_error_ = 0.0;
  int evaluations_ = 0;
};

// Drops points within 1e-12 (max norm) of a later point.
void merge_duplicates(const Matrix& points, const Vector& values, Matrix& out_points, Vector& out_values);

}  // namespace calproj
