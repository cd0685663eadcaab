#pragma once

#include "calproj/common.hpp"
#include "calproj/linprog.hpp"
#include "calproj/moment_model.hpp"

#include <cstdint>
#include <memory>

namespace calproj {

enum class BootstrapMode { multiplier, resample };

// Bootstrap weights, B x n. Multiplier weights are iid N(0,1); resample
// weights are multinomial counts. Row b depends only on (seed, b), so the same
// draws are reused at every theta.
struct BootstrapDraws {
  BootstrapMode mode = BootstrapMode::multiplier;
  std::uint64_t seed = 0;
  Matrix weights;

  int B() const { return static_cast<int>(weights.rows()); }
  int n() const { return static_cast<int>(weights.cols()); }
  static BootstrapDraws generate(int n, int B, BootstrapMode mode, std::uint64_t seed);
};

// B x J matrix of bootstrapped studentized empirical processes.
struct BootstrapEnsemble {
  int B = 0;
  Matrix G;
  BootstrapMode mode = BootstrapMode::multiplier;
  std::uint64_t seed = 0;
};

BootstrapEnsemble bootstrap_ensemble(const MomentSample& sample, const Vector& theta,
                                     const BootstrapDraws& draws);
BootstrapEnsemble bootstrap_ensemble(const MomentModel& model, const Matrix& data, const Vector& theta,
                                     int B, BootstrapMode mode, std::uint64_t seed);

// Restriction on the local direction lambda: p'lambda = 0 for each row of
// `directions` (hyperplane), or q'lambda >= 0 (halfspace, one row).
struct Localization {
  enum class Kind { hyperplane, halfspace };
  Kind kind = Kind::hyperplane;
  Matrix directions;

  static Localization hyperplane(const Vector& p);
  static Localization halfspace(const Vector& q);
  static Localization joint(const Matrix& directions);
};

// The family of linear programs behind the critical level at one theta.
// Replicate b is feasible at level c when some lambda in the box satisfies
// intercept(b, i) + coef.row(i) lambda <= c for all i and fixed_rows lambda <= 0.
struct CalibrationProblem {
  Matrix coef;
  Matrix intercept;
  Matrix fixed_rows;
  Vector lam_lower;
  Vector lam_upper;

  int B() const { return static_cast<int>(intercept.rows()); }
  int rows() const { return static_cast<int>(coef.rows()); }
  int dim() const { return static_cast<int>(coef.cols()); }
};

struct CalibrationSettings {
  GmsConfig gms;
  double rho = kInf;
  Localization localization;
};

// Assembles the problem from its pieces. `phi` may hold -inf (row dropped).
// Paired rows (j, j + R1) use the hard-threshold or smooth replacement.
CalibrationProblem calibration_problem(const Matrix& G, const Matrix& D, const Vector& phi,
                                       const Vector& lam_lower, const Vector& lam_upper,
                                       const Localization& loc, int R1, bool smooth_gms,
                                       const Vector& pair_weight);
CalibrationProblem calibration_problem(const MomentSample& sample, const Vector& theta,
                                       const BootstrapEnsemble& ensemble, const CalibrationSettings& s);

LinearSystem lambda_system(const CalibrationProblem& prob, int b, double c);
// Fraction of feasible replicates at c minus (1 - alpha); every replicate is solved.
double h_alpha(const CalibrationProblem& prob, double alpha, double c);
// Smallest c in [lo, hi] at which replicate b is feasible (hi if none).
double minimal_level(const CalibrationProblem& prob, int b, double lo, double hi);

struct RootOptions {
  double tol = 1e-4;
  int max_iter = 100;
  // Replace the final bracket end by the exact infimum of the step function.
  bool exact = true;
};

struct CriticalLevel {
  double value = 0.0;
  double bracket_lower = 0.0;
  double bracket_upper = 0.0;
  double upper_bound = 0.0;
  int iterations = 0;
  // Fraction of replicates feasible at value.
  double coverage_at_value = 0.0;
  // The upper bound was returned because it still failed to cover.
  bool bound_hit = false;
  long lp_solves = 0;
};

double bonferroni_bound(double alpha, int J);

// Brent-Dekker search for inf{c >= 0 : h_alpha(c) >= 0} on [0, upper_bound].
// Feasibility is monotone in c, so per-replicate outcomes are cached.
CriticalLevel solve_critical_level(const CalibrationProblem& prob, double alpha, double upper_bound,
                                   const RootOptions& opt = {});

// Calibrated projection critical level at theta. The upper bound is the
// smaller of the Bonferroni bound and the level at which lambda = 0 covers.
CriticalLevel critical_level(const MomentSample& sample, const Vector& theta, double alpha,
                             const BootstrapEnsemble& ensemble, const CalibrationSettings& s,
                             const RootOptions& opt = {});
CriticalLevel critical_level(const MomentModel& model, const Matrix& data, const Vector& theta,
                             const Vector& p, double alpha, double rho, const GmsConfig& gms, int B,
                             std::uint64_t seed, BootstrapMode mode = BootstrapMode::multiplier,
                             const RootOptions& opt = {});

// (1 - alpha) empirical quantile of max_j (G_bj + phi_j), floored at 0.
double as_projection_critical(const Matrix& G, const Vector& phi, double alpha);
double as_projection_critical(const MomentSample& sample, const Vector& theta, double alpha,
                              const BootstrapEnsemble& ensemble, const GmsConfig& gms);

// Solves 1 - (1 - 2 Phi(-rho))^(d C(J, d)) = eta for rho.
double rho_from_eta(double eta, int J, int d);

// Index of the (1 - alpha) empirical quantile among B sorted values.
int quantile_rank(int B, double alpha);

enum class CalibrationMode { calibrated, one_sided, as_projection, constant };

// theta -> critical value, holding the bootstrap draws fixed across theta.
class CriticalValueFunction {
 public:
  CriticalValueFunction(const MomentSample& sample, BootstrapDraws draws, CalibrationMode mode, double alpha,
                        const CalibrationSettings& settings, const RootOptions& root = {});
  static CriticalValueFunction constant_value(const MomentSample& sample, double c);

  // `direction` is p for calibrated, q for one-sided, ignored otherwise.
  CriticalLevel evaluate(const Vector& theta, const Vector& direction) const;
  double operator()(const Vector& theta, const Vector& direction) const {
    return evaluate(theta, direction).value;
  }
  CalibrationMode mode() const { return mode_; }

 private:
  const BootstrapEnsemble& ensemble_at(const Vector& theta, BootstrapEnsemble& scratch) const;

  const MomentSample* sample_;
  BootstrapDraws draws_;
  CalibrationMode mode_;
  double alpha_ = 0.05;
  CalibrationSettings settings_;
  RootOptions root_;
  double constant_ = 0.0;
  std::shared_ptr<BootstrapEnsemble> fixed_ensemble_;
};

}  // namespace calproj
