#include "calproj/critical_level.hpp"

#include "calproj/normal.hpp"
#include "calproj/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace calproj {

BootstrapDraws BootstrapDraws::generate(int n, int B, BootstrapMode mode, std::uint64_t seed) {
  if (n < 1 || B < 1) throw Error("bootstrap needs n >= 1 and B >= 1");
  BootstrapDraws d;
  d.mode = mode;
  d.seed = seed;
  d.weights = Matrix::Zero(B, n);
  for (int b = 0; b < B; ++b) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    if (mode == BootstrapMode::multiplier) {
      std::normal_distribution<double> z;
      for (int i = 0; i < n; ++i) d.weights(b, i) = z(rng);
    } else {
      std::uniform_int_distribution<int> pick(0, n - 1);
      for (int i = 0; i < n; ++i) d.weights(b, pick(rng)) += 1.0;
    }
  }
  return d;
}

BootstrapEnsemble bootstrap_ensemble(const MomentSample& sample, const Vector& theta, const BootstrapDraws& draws) {
  if (draws.n() != sample.n()) throw Error("bootstrap draws do not match the sample size");
  const MomentModel& m = sample.model();
  Matrix base = draws.weights * sample.centered(theta) / std::sqrt(static_cast<double>(sample.n()));
  BootstrapEnsemble e;
  e.B = draws.B();
  e.mode = draws.mode;
  e.seed = draws.seed;
  e.G.resize(e.B, m.J());
  e.G.leftCols(m.base_count()) = base;
  e.G.rightCols(m.J2()) = -base.middleCols(m.J1(), m.J2());
  return e;
}

BootstrapEnsemble bootstrap_ensemble(const MomentModel& model, const Matrix& data, const Vector& theta, int B,
                                     BootstrapMode mode, std::uint64_t seed) {
  MomentSample sample(model, data);
  return bootstrap_ensemble(sample, theta, BootstrapDraws::generate(sample.n(), B, mode, seed));
}

Localization Localization::hyperplane(const Vector& p) {
  Localization l;
  l.kind = Kind::hyperplane;
  l.directions = p.transpose();
  return l;
}

Localization Localization::halfspace(const Vector& q) {
  Localization l;
  l.kind = Kind::halfspace;
  l.directions = q.transpose();
  return l;
}

Localization Localization::joint(const Matrix& directions) {
  Localization l;
  l.kind = Kind::hyperplane;
  l.directions = directions;
  return l;
}

CalibrationProblem calibration_problem(const Matrix& G, const Matrix& D, const Vector& phi, const Vector& lam_lower,
                                       const Vector& lam_upper, const Localization& loc, int R1, bool smooth_gms,
                                       const Vector& pair_weight) {
  const int J = static_cast<int>(D.rows());
  const int d = static_cast<int>(D.cols());
  if (G.cols() != J || phi.size() != J) throw Error("ensemble, gradients and GMS values disagree on J");
  if (lam_lower.size() != d || lam_upper.size() != d) throw Error("lambda box has the wrong dimension");
  if (loc.directions.rows() > 0 && loc.directions.cols() != d) throw Error("direction has the wrong dimension");

  // Each kept row is (weights over G columns, gradient row, constant).
  Matrix W = Matrix::Zero(J, J);
  Matrix A = Matrix::Zero(J, d);
  Vector cst = Vector::Zero(J);
  std::vector<int> keep;
  auto set_row = [&](int r, const Vector& w, const Vector& a, double c0) {
    W.row(r) = w.transpose();
    A.row(r) = a.transpose();
    cst[r] = c0;
    if (std::isfinite(c0)) keep.push_back(r);
  };
  for (int j = 0; j < J; ++j) {
    Vector e = Vector::Unit(J, j);
    bool paired = j < 2 * R1;
    if (!paired) {
      set_row(j, e, D.row(j).transpose(), phi[j]);
      continue;
    }
    int first = j < R1 ? j : j - R1;
    int second = first + R1;
    if (smooth_gms) {
      double mu = pair_weight[first];
      Vector w = mu * Vector::Unit(J, first) - (1.0 - mu) * Vector::Unit(J, second);
      Vector a = mu * D.row(first).transpose() - (1.0 - mu) * D.row(second).transpose();
      double sign = j == first ? 1.0 : -1.0;
      set_row(j, sign * w, sign * a, phi[j]);
    } else if (j == second && phi[first] == 0.0 && phi[second] == 0.0) {
      set_row(j, -Vector::Unit(J, first), -D.row(first).transpose(), 0.0);
    } else {
      set_row(j, e, D.row(j).transpose(), phi[j]);
    }
  }

  CalibrationProblem prob;
  const int m = static_cast<int>(keep.size());
  prob.coef.resize(m, d);
  Matrix Wk(m, J);
  Vector ck(m);
  for (int r = 0; r < m; ++r) {
    prob.coef.row(r) = A.row(keep[r]);
    Wk.row(r) = W.row(keep[r]);
    ck[r] = cst[keep[r]];
  }
  prob.intercept = G * Wk.transpose();
  prob.intercept.rowwise() += ck.transpose();

  const int k = static_cast<int>(loc.directions.rows());
  if (loc.kind == Localization::Kind::hyperplane) {
    prob.fixed_rows.resize(2 * k, d);
    for (int i = 0; i < k; ++i) {
      prob.fixed_rows.row(2 * i) = loc.directions.row(i);
      prob.fixed_rows.row(2 * i + 1) = -loc.directions.row(i);
    }
  } else {
    prob.fixed_rows = -loc.directions;
  }
  prob.lam_lower = lam_lower;
  prob.lam_upper = lam_upper;
  return prob;
}

namespace {

void lambda_box(const MomentSample& sample, const Vector& theta, double rho, Vector& lo, Vector& hi) {
  const Box& box = sample.model().box();
  const double rn = std::sqrt(static_cast<double>(sample.n()));
  lo = (rn * (box.lower - theta)).cwiseMin(0.0).cwiseMax(-rho);
  hi = (rn * (box.upper - theta)).cwiseMax(0.0).cwiseMin(rho);
}

Vector gms_values(const MomentSample& sample, const Vector& theta, const GmsConfig& gms, SampleMoments& sm) {
  sm = sample.moments(theta);
  return gms_apply(gms, xi_hat(sm, gms.kappa_for(sample.n())), sample.model().J1());
}

}  // namespace

CalibrationProblem calibration_problem(const MomentSample& sample, const Vector& theta,
                                       const BootstrapEnsemble& ensemble, const CalibrationSettings& s) {
  SampleMoments sm;
  Vector phi = gms_values(sample, theta, s.gms, sm);
  Vector lo, hi;
  lambda_box(sample, theta, s.rho, lo, hi);
  return calibration_problem(ensemble.G, sample.gradients(theta), phi, lo, hi, s.localization,
                             sample.model().paired(), s.gms.smooth(), sm.pair_weight);
}

LinearSystem lambda_system(const CalibrationProblem& prob, int b, double c) {
  const int m = prob.rows();
  const int k = static_cast<int>(prob.fixed_rows.rows());
  LinearSystem sys;
  sys.A.resize(m + k, prob.dim());
  sys.b.resize(m + k);
  sys.A.topRows(m) = prob.coef;
  sys.A.bottomRows(k) = prob.fixed_rows;
  sys.b.head(m) = (c - prob.intercept.row(b).array()).transpose();
  sys.b.tail(k).setZero();
  sys.lower = prob.lam_lower;
  sys.upper = prob.lam_upper;
  return sys;
}

double h_alpha(const CalibrationProblem& prob, double alpha, double c) {
  int count = 0;
  for (int b = 0; b < prob.B(); ++b)
    if (feasible(lambda_system(prob, b, c))) ++count;
  return static_cast<double>(count) / prob.B() - (1.0 - alpha);
}

double minimal_level(const CalibrationProblem& prob, int b, double lo, double hi) {
  const int m = prob.rows();
  const int k = static_cast<int>(prob.fixed_rows.rows());
  const int d = prob.dim();
  LinearSystem sys;
  sys.A = Matrix::Zero(m + k, d + 1);
  sys.b.resize(m + k);
  sys.A.topLeftCorner(m, d) = prob.coef;
  sys.A.topRightCorner(m, 1).setConstant(-1.0);
  sys.A.bottomLeftCorner(k, d) = prob.fixed_rows;
  sys.b.head(m) = -prob.intercept.row(b).transpose();
  sys.b.tail(k).setZero();
  sys.lower.resize(d + 1);
  sys.upper.resize(d + 1);
  sys.lower << prob.lam_lower, lo;
  sys.upper << prob.lam_upper, hi;
  Vector obj = Vector::Zero(d + 1);
  obj[d] = -1.0;
  LpResult r = maximize(obj, sys);
  if (r.status != LpStatus::optimal) return hi;
  return std::clamp(r.x[d], lo, hi);
}

double bonferroni_bound(double alpha, int J) { return normal::quantile(1.0 - alpha / J); }

int quantile_rank(int B, double alpha) {
  int k = static_cast<int>(std::ceil((1.0 - alpha) * B - 1e-9));
  return std::clamp(k, 1, B);
}

namespace {

// Caches, per replicate, the largest level known infeasible and the smallest
// level known feasible.
class FeasibilityCache {
 public:
  explicit FeasibilityCache(const CalibrationProblem& prob) : prob_(prob) {
    const int B = prob.B();
    feasible_from_.resize(B);
    infeasible_upto_.assign(B, -kInf);
    for (int b = 0; b < B; ++b)
      feasible_from_[b] = prob.rows() == 0 ? -kInf : prob.intercept.row(b).maxCoeff();
  }

  bool status(int b, double c) {
    if (c >= feasible_from_[b]) return true;
    if (c <= infeasible_upto_[b]) return false;
    ++solves;
    if (feasible(lambda_system(prob_, b, c))) {
      feasible_from_[b] = c;
      return true;
    }
    infeasible_upto_[b] = c;
    return false;
  }

  int count(double c) {
    int n = 0;
    for (int b = 0; b < prob_.B(); ++b) n += status(b, c) ? 1 : 0;
    return n;
  }

  void record_feasible(int b, double c) { feasible_from_[b] = std::min(feasible_from_[b], c); }

  long solves = 0;

 private:
  const CalibrationProblem& prob_;
  std::vector<double> feasible_from_;
  std::vector<double> infeasible_upto_;
};

}  // namespace

CriticalLevel solve_critical_level(const CalibrationProblem& prob, double alpha, double upper_bound,
                                   const RootOptions& opt) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  const int B = prob.B();
  if (B < 1) throw Error("empty bootstrap ensemble");
  const int need = quantile_rank(B, alpha);
  FeasibilityCache cache(prob);
  auto h = [&](double c) { return static_cast<double>(cache.count(c)) / B - (1.0 - alpha); };

  CriticalLevel out;
  out.upper_bound = upper_bound;
  double lo = 0.0, flo = h(lo);
  if (flo >= 0.0 || upper_bound <= 0.0) {
    out.value = 0.0;
    out.coverage_at_value = flo + 1.0 - alpha;
    out.lp_solves = cache.solves;
    return out;
  }
  double hi = upper_bound, fhi = h(hi);
  if (fhi < 0.0) {
    out.value = hi;
    out.bracket_lower = hi;
    out.bracket_upper = hi;
    out.bound_hit = true;
    out.coverage_at_value = fhi + 1.0 - alpha;
    out.lp_solves = cache.solves;
    return out;
  }

  // Bracketed Brent-Dekker iteration: inverse quadratic or secant steps,
  // falling back to bisection when the bracket fails to halve.
  double x3 = std::nan(""), f3 = std::nan("");
  double width_before = hi - lo;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    if (fhi <= opt.tol || hi - lo <= opt.tol) break;
    double s;
    if (std::isfinite(x3) && f3 != flo && f3 != fhi && flo != fhi) {
      s = lo * fhi * f3 / ((flo - fhi) * (flo - f3)) + hi * flo * f3 / ((fhi - flo) * (fhi - f3)) +
          x3 * flo * fhi / ((f3 - flo) * (f3 - fhi));
    } else {
      s = hi - fhi * (hi - lo) / (fhi - flo);
    }
    const double guard = 0.25 * opt.tol;
    bool bisect = !(s > lo + guard && s < hi - guard);
    if (it % 2 == 1) {
      if (hi - lo > 0.5 * width_before) bisect = true;
      width_before = hi - lo;
    }
    if (bisect) s = 0.5 * (lo + hi);
    double fs = h(s);
    if (fs < 0.0) {
      x3 = lo;
      f3 = flo;
      lo = s;
      flo = fs;
    } else {
      x3 = hi;
      f3 = fhi;
      hi = s;
      fhi = fs;
    }
  }
  out.iterations = it;
  out.bracket_lower = lo;
  out.bracket_upper = hi;
  out.value = hi;

  if (opt.exact) {
    // Every replicate's status is known at lo and hi; only those switching in
    // between matter for the order statistic.
    int feasible_lo = 0;
    std::vector<int> switching;
    for (int b = 0; b < B; ++b) {
      if (cache.status(b, lo))
        ++feasible_lo;
      else if (cache.status(b, hi))
        switching.push_back(b);
    }
    std::vector<double> levels;
    levels.reserve(switching.size());
    for (int b : switching) {
      double c = minimal_level(prob, b, lo, hi);
      ++cache.solves;
      cache.record_feasible(b, c);
      levels.push_back(c);
    }
    std::sort(levels.begin(), levels.end());
    int idx = need - feasible_lo - 1;
    if (idx >= 0 && idx < static_cast<int>(levels.size())) out.value = levels[idx];
  }
  out.coverage_at_value = static_cast<double>(cache.count(out.value)) / B;
  out.lp_solves = cache.solves;
  return out;
}

CriticalLevel critical_level(const MomentSample& sample, const Vector& theta, double alpha,
                             const BootstrapEnsemble& ensemble, const CalibrationSettings& s,
                             const RootOptions& opt) {
  CalibrationProblem prob = calibration_problem(sample, theta, ensemble, s);
  double bound = bonferroni_bound(alpha, sample.model().J());
  // lambda = 0 is always admissible, so this level is known to cover
  if (prob.rows() > 0) {
    std::vector<double> t(prob.B());
    for (int b = 0; b < prob.B(); ++b) t[b] = prob.intercept.row(b).maxCoeff();
    std::nth_element(t.begin(), t.begin() + quantile_rank(prob.B(), alpha) - 1, t.end());
    bound = std::min(bound, std::max(0.0, t[quantile_rank(prob.B(), alpha) - 1]));
  } else {
    bound = 0.0;
  }
  return solve_critical_level(prob, alpha, bound, opt);
}

CriticalLevel critical_level(const MomentModel& model, const Matrix& data, const Vector& theta, const Vector& p,
                             double alpha, double rho, const GmsConfig& gms, int B, std::uint64_t seed,
                             BootstrapMode mode, const RootOptions& opt) {
  MomentSample sample(model, data);
  BootstrapEnsemble ens = bootstrap_ensemble(sample, theta, BootstrapDraws::generate(sample.n(), B, mode, seed));
  CalibrationSettings s;
  s.gms = gms;
  s.rho = rho;
  s.localization = Localization::hyperplane(p);
  return critical_level(sample, theta, alpha, ens, s, opt);
}

double as_projection_critical(const Matrix& G, const Vector& phi, double alpha) {
  const int B = static_cast<int>(G.rows());
  if (B < 1) throw Error("empty bootstrap ensemble");
  std::vector<double> t(B);
  for (int b = 0; b < B; ++b) t[b] = (G.row(b).transpose() + phi).maxCoeff();
  const int k = quantile_rank(B, alpha) - 1;
  std::nth_element(t.begin(), t.begin() + k, t.end());
  return std::max(0.0, t[k]);
}

double as_projection_critical(const MomentSample& sample, const Vector& theta, double alpha,
                              const BootstrapEnsemble& ensemble, const GmsConfig& gms) {
  SampleMoments sm;
  Vector phi = gms_values(sample, theta, gms, sm);
  return as_projection_critical(ensemble.G, phi, alpha);
}

double rho_from_eta(double eta, int J, int d) {
  if (!(eta > 0.0 && eta < 1.0)) throw Error("eta must lie in (0, 1)");
  if (d < 1 || J < d) throw Error("rho needs 1 <= d <= J");
  const double log_e = std::log(static_cast<double>(d)) + std::lgamma(J + 1.0) - std::lgamma(d + 1.0) -
                       std::lgamma(J - d + 1.0);
  const double E = std::exp(log_e);
  auto f = [&](double rho) { return -std::expm1(E * std::log1p(-2.0 * normal::cdf(-rho))) - eta; };
  double lo = 0.0, hi = 1.0;
  while (f(hi) > 0.0) hi *= 2.0;
  while (hi - lo > 1e-10) {
    double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

CriticalValueFunction::CriticalValueFunction(const MomentSample& sample, BootstrapDraws draws, CalibrationMode mode,
                                             double alpha, const CalibrationSettings& settings,
                                             const RootOptions& root)
    : sample_(&sample), draws_(std::move(draws)), mode_(mode), alpha_(alpha), settings_(settings), root_(root) {
  if (mode_ != CalibrationMode::constant && draws_.n() != sample.n())
    throw Error("bootstrap draws do not match the sample size");
  if (mode_ != CalibrationMode::constant && sample.model().is_separable())
    fixed_ensemble_ = std::make_shared<BootstrapEnsemble>(bootstrap_ensemble(sample, sample.model().box().center(), draws_));
}

CriticalValueFunction CriticalValueFunction::constant_value(const MomentSample& sample, double c) {
  CriticalValueFunction f(sample, BootstrapDraws{}, CalibrationMode::constant, 0.05, CalibrationSettings{});
  f.constant_ = c;
  return f;
}

const BootstrapEnsemble& CriticalValueFunction::ensemble_at(const Vector& theta, BootstrapEnsemble& scratch) const {
  if (fixed_ensemble_) return *fixed_ensemble_;
  scratch = bootstrap_ensemble(*sample_, theta, draws_);
  return scratch;
}

CriticalLevel CriticalValueFunction::evaluate(const Vector& theta, const Vector& direction) const {
  CriticalLevel out;
  if (mode_ == CalibrationMode::constant) {
    out.value = constant_;
    out.bracket_lower = out.bracket_upper = constant_;
    return out;
  }
  BootstrapEnsemble scratch;
  const BootstrapEnsemble& ens = ensemble_at(theta, scratch);
  if (mode_ == CalibrationMode::as_projection) {
    out.value = as_projection_critical(*sample_, theta, alpha_, ens, settings_.gms);
    out.bracket_lower = out.bracket_upper = out.value;
    return out;
  }
  CalibrationSettings s = settings_;
  if (direction.size() > 0) {
    s.localization = mode_ == CalibrationMode::one_sided ? Localization::halfspace(direction)
                                                         : Localization::hyperplane(direction);
  }
  return critical_level(*sample_, theta, alpha_, ens, s, root_);
}

}  // namespace calproj
