#pragma once

#include "calproj/common.hpp"
#include "calproj/critical_level.hpp"
#include "calproj/moment_model.hpp"
#include "calproj/surrogate.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace calproj {

// The function whose maximum over the confidence set is sought: p'theta, or a
// smooth f with its gradient.
struct Objective {
  Vector p;
  std::function<double(const Vector&)> f;
  std::function<Vector(const Vector&)> grad;

  static Objective linear(const Vector& p);
  static Objective smooth(std::function<double(const Vector&)> f, std::function<Vector(const Vector&)> grad);
  bool is_linear() const { return p.size() > 0; }
  double value(const Vector& theta) const;
  Vector gradient(const Vector& theta) const;
  Objective negated() const;
};

// Constraint values g_j(theta) and their Jacobian.
struct ConstraintSet {
  std::function<Vector(const Vector&)> values;
  std::function<Matrix(const Vector&)> jacobian;

  static ConstraintSet from_sample(const MomentSample& sample);
};

struct EamProblem {
  Box box;
  Objective objective;
  ConstraintSet constraints;
  // theta -> critical value c(theta)
  std::function<double(const Vector&)> critical;
};

struct EamOptions {
  int k = 0;  // initial points; 0 means 10 d + 1
  double epsilon = 0.05;
  int max_iter = 200;
  double conv_tol = 0.005;
  int min_stall = 3;
  std::uint64_t seed = 0;
  int threads = 1;
  int probes = 1000;
  int local_starts = 6;
  // full likelihood search every this many refits; other refits keep beta
  int refit_every = 5;
  Kernel kernel = Kernel::gaussian();
  // feasibility slack on g_j <= c
  double feas_tol = 1e-9;
};

struct EamIteration {
  int L = 0;
  double incumbent = -kInf;
  double ei_max = 0.0;
  Vector proposal;
  bool random_draw = false;
};

struct EamState {
  Matrix points;
  Vector cvals;
  Vector gmax;  // max_j g_j at each point
  Vector objective;
  std::vector<bool> feasible;
  int star = -1;
  std::vector<EamIteration> history;

  int size() const { return static_cast<int>(cvals.size()); }
  double incumbent() const { return star >= 0 ? objective[star] : -kInf; }
  void add(const Vector& theta, double c, double gmax, double obj, double feas_tol);
};

struct EamResult {
  bool empty = true;
  double endpoint = kInf;
  Vector theta;
  bool converged = false;
  int iterations = 0;
  EamState state;
};

Matrix initialize_points(const Box& box, int k, std::uint64_t seed);

// (a)_+ times the surrogate feasibility probability at theta.
double expected_improvement(const Vector& theta, const KrigingModel& model, double incumbent, double gbar,
                            const Objective& objective);

struct Proposal {
  Vector theta;
  // EI maximiser; equals theta unless a random draw replaced it
  Vector maximizer;
  double ei = 0.0;
  bool random_draw = false;
};

// EI maximiser (with probability epsilon replaced by a uniform draw). The
// returned `ei` is always that of the maximiser.
Proposal m_step(const EamProblem& problem, const KrigingModel& model, const EamState& state, const EamOptions& opt,
                std::uint64_t seed);

EamResult run_direction(const EamProblem& problem, const EamOptions& opt);

struct CiOptions {
  CalibrationMode mode = CalibrationMode::calibrated;
  double alpha = 0.05;
  double rho = kInf;
  GmsConfig gms;
  int B = 1000;
  BootstrapMode bootstrap = BootstrapMode::multiplier;
  std::uint64_t seed = 0;
  RootOptions root;
  EamOptions eam;
  // constant critical value for CalibrationMode::constant
  double constant = 0.0;
  // run the two directions concurrently
  int threads = 1;
};

struct CiResult {
  double lower = -kInf;
  double upper = kInf;
  bool empty = false;
  EamResult lower_run;
  EamResult upper_run;
};

// [-max(-p'theta), max(p'theta)] over {theta : g_j(theta) <= c(theta)}.
CiResult confidence_interval(const MomentSample& sample, const Vector& p, const CiOptions& opt);
// The same for a smooth function; the critical level uses grad f / |grad f|.
CiResult confidence_interval(const MomentSample& sample, const Objective& f, const CiOptions& opt);
// One interval per row of `directions`, all calibrated jointly.
std::vector<CiResult> joint_confidence_box(const MomentSample& sample, const Matrix& directions, const CiOptions& opt);

}  // namespace calproj
