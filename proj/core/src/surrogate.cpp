#include "calproj/surrogate.hpp"

#include "calproj/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace calproj {

namespace {

double weighted_r2(const Vector& beta, const Vector& a, const Vector& b) {
  return ((a - b).array().square() / beta.array()).sum();
}

double matern_const(double nu) { return std::pow(2.0, 1.0 - nu) / std::tgamma(nu); }

}  // namespace

double kernel_eval(const Kernel& k, const Vector& beta, const Vector& a, const Vector& b) {
  double r2 = weighted_r2(beta, a, b);
  if (k.kind == KernelKind::gaussian) return std::exp(-r2);
  double u = std::sqrt(2.0 * k.nu * r2);
  if (u < 1e-10) return 1.0;
  if (u > 700.0) return 0.0;
  return matern_const(k.nu) * std::pow(u, k.nu) * std::cyl_bessel_k(k.nu, u);
}

Vector kernel_gradient(const Kernel& k, const Vector& beta, const Vector& a, const Vector& b) {
  Vector delta = (a - b).cwiseQuotient(beta);
  if (k.kind == KernelKind::gaussian) return -2.0 * std::exp(-weighted_r2(beta, a, b)) * delta;
  double r2 = weighted_r2(beta, a, b);
  double u = std::sqrt(2.0 * k.nu * r2);
  if (u > 700.0) return Vector::Zero(a.size());
  // d/du [u^nu K_nu(u)] = -u^nu K_{nu-1}(u); du/da_k = 2 nu delta_k / u
  double g;
  if (u < 1e-10) {
    if (k.nu <= 1.0) return Vector::Zero(a.size());
    g = std::pow(2.0, k.nu - 2.0) * std::tgamma(k.nu - 1.0);
  } else {
    g = std::pow(u, k.nu - 1.0) * std::cyl_bessel_k(std::abs(k.nu - 1.0), u);
  }
  return -matern_const(k.nu) * g * 2.0 * k.nu * delta;
}

KrigingOptions KrigingOptions::for_box(const Box& box, Kernel kernel) {
  KrigingOptions o;
  o.kernel = kernel;
  o.beta_lower = 0.01 * box.width();
  o.beta_upper = 10.0 * box.width();
  return o;
}

void merge_duplicates(const Matrix& points, const Vector& values, Matrix& out_points, Vector& out_values) {
  const int L = static_cast<int>(points.rows());
  std::vector<int> keep;
  for (int i = 0; i < L; ++i) {
    bool later = false;
    for (int j = i + 1; j < L && !later; ++j)
      later = (points.row(i) - points.row(j)).cwiseAbs().maxCoeff() <= 1e-12;
    if (!later) keep.push_back(i);
  }
  out_points.resize(static_cast<int>(keep.size()), points.cols());
  out_values.resize(static_cast<int>(keep.size()));
  for (int r = 0; r < static_cast<int>(keep.size()); ++r) {
    out_points.row(r) = points.row(keep[r]);
    out_values[r] = values[keep[r]];
  }
}

bool KrigingModel::build(const Vector& beta, double nugget, double max_nugget) {
  const int L = size();
  Matrix R(L, L);
  for (int i = 0; i < L; ++i) {
    R(i, i) = 1.0;
    for (int j = 0; j < i; ++j) {
      double v = kernel_eval(kernel_, beta, points_.row(i).transpose(), points_.row(j).transpose());
      R(i, j) = v;
      R(j, i) = v;
    }
  }
  ++evaluations_;
  for (double tau = nugget; tau <= max_nugget * (1.0 + 1e-9); tau *= 10.0) {
    Matrix Rt = R;
    Rt.diagonal().array() += tau;
    llt_.compute(Rt);
    if (llt_.info() != Eigen::Success) continue;
    const Matrix& Lm = llt_.matrixLLT();
    double min_diag = Lm.diagonal().minCoeff();
    if (!(min_diag > 0.0) || !std::isfinite(min_diag)) continue;
    beta_ = beta;
    nugget_ = tau;
    w1_ = llt_.solve(Vector::Ones(L));
    one_w1_ = w1_.sum();
    mu_ = w1_.dot(values_) / one_w1_;
    Vector resid = values_.array() - mu_;
    alpha_ = llt_.solve(resid);
    varsigma2_ = std::max(0.0, resid.dot(alpha_) / L);
    // (R + tau I) alpha = resid, so the predictor misses each site by tau alpha_l
    interp_error_ = tau * alpha_.cwiseAbs().maxCoeff();
    double logdet = 2.0 * Lm.diagonal().array().log().sum();
    loglik_ = -0.5 * L * std::log(std::max(varsigma2_, 1e-300)) - 0.5 * logdet;
    return true;
  }
  return false;
}

KrigingModel KrigingModel::fit_fixed(const Matrix& points, const Vector& values, const Vector& beta,
                                     const Kernel& kernel, double nugget, double max_nugget) {
  KrigingModel m;
  merge_duplicates(points, values, m.points_, m.values_);
  if (m.size() < 2) throw Error("kriging needs at least two distinct points");
  if (beta.size() != points.cols()) throw Error("beta has the wrong dimension");
  m.kernel_ = kernel;
  if (!m.build(beta, nugget, max_nugget)) throw IllConditionedError();
  return m;
}

KrigingModel KrigingModel::fit(const Matrix& points, const Vector& values, const KrigingOptions& opt,
                               const Vector& beta_start) {
  KrigingModel m;
  merge_duplicates(points, values, m.points_, m.values_);
  if (m.size() < 2) throw Error("kriging needs at least two distinct points");
  const int d = static_cast<int>(points.cols());
  if (opt.beta_lower.size() != d || opt.beta_upper.size() != d) throw Error("beta bounds have the wrong dimension");
  m.kernel_ = opt.kernel;
  const Vector lo = opt.beta_lower.array().log();
  const Vector hi = opt.beta_upper.array().log();
  auto to_beta = [&](const Vector& x) { return Vector(x.array().exp()); };

  Vector first = beta_start.size() == d ? Vector(beta_start.cwiseMax(opt.beta_lower).cwiseMin(opt.beta_upper).array().log())
                                        : Vector(0.5 * (lo + hi));
  const double spread = m.values_.maxCoeff() - m.values_.minCoeff();
  if (spread <= 1e-14 * (1.0 + m.values_.cwiseAbs().maxCoeff())) {
    // flat data: the likelihood is degenerate, keep the starting beta
    if (!m.build(to_beta(first), opt.nugget, opt.max_nugget)) throw IllConditionedError();
    return m;
  }

  int evals = 0;
  // Likelihood restricted to beta that keep the interpolation property; the
  // best unrestricted value is kept as a fallback.
  double loose_f = -kInf;
  Vector loose_x;
  auto objective = [&](const Vector& x) {
    ++evals;
    KrigingModel trial;
    trial.points_ = m.points_;
    trial.values_ = m.values_;
    trial.kernel_ = m.kernel_;
    if (!trial.build(to_beta(x), opt.nugget, opt.max_nugget)) return -kInf;
    if (trial.loglik_ > loose_f) {
      loose_f = trial.loglik_;
      loose_x = x;
    }
    if (trial.relative_interpolation_error() > opt.interpolation_tol) return -kInf;
    return trial.loglik_;
  };

  std::mt19937_64 rng(derive_seed(opt.seed, 0x6b726967ULL));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // multistart pattern search in log(beta) over [lo, hi]
  auto search = [&](const Vector& lo, const Vector& hi, const Vector& first, int budget) {
    const int before = evals;
    std::vector<std::pair<double, Vector>> starts;
    for (int s = 0; s < std::max(1, opt.starts); ++s) {
      Vector x = first.cwiseMax(lo).cwiseMin(hi);
      if (s > 0)
        for (int k = 0; k < d; ++k) x[k] = lo[k] + unif(rng) * (hi[k] - lo[k]);
      starts.emplace_back(objective(x), x);
    }
    std::stable_sort(starts.begin(), starts.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    const int searches = std::min<int>(2, static_cast<int>(starts.size()));
    const int budget_each = std::max(0, (budget - (evals - before)) / searches);
    double best_f = starts[0].first;
    Vector best_x = starts[0].second;
    for (int s = 0; s < searches; ++s) {
      Vector x = starts[s].second;
      double fx = starts[s].first;
      double step = opt.initial_step;
      int used = 0;
      while (step >= 0.02 && used < budget_each) {
        bool improved = false;
        for (int k = 0; k < d && used < budget_each; ++k) {
          for (double dir : {1.0, -1.0}) {
            if (used >= budget_each) break;
            Vector y = x;
            y[k] = std::clamp(x[k] + dir * step, lo[k], hi[k]);
            if (y[k] == x[k]) continue;
            double fy = objective(y);
            ++used;
            if (fy > fx) {
              x = y;
              fx = fy;
              improved = true;
              break;
            }
          }
        }
        if (!improved) step *= 0.5;
      }
      if (fx > best_f) {
        best_f = fx;
        best_x = x;
      }
    }
    return std::make_pair(best_f, best_x);
  };

  auto [best_f, best_x] = search(lo, hi, first, opt.max_evaluations);
  if (!std::isfinite(best_f)) {
    // Dense designs can make every admissible beta too ill-conditioned to
    // interpolate; allow shorter length scales, up to two decades below.
    const Vector lo2 = lo.array() - std::log(100.0);
    auto [f2, x2] = search(lo2, lo, lo, opt.max_evaluations / 2);
    best_f = f2;
    best_x = x2;
  }
  if (!std::isfinite(best_f)) {
    if (!std::isfinite(loose_f)) throw IllConditionedError();
    best_x = loose_x;
  }
  if (!m.build(to_beta(best_x), opt.nugget, opt.max_nugget)) throw IllConditionedError();
  m.evaluations_ = evals + 1;
  return m;
}

double KrigingModel::relative_interpolation_error() const {
  return interp_error_ / (1.0 + values_.cwiseAbs().maxCoeff());
}

KrigingPrediction KrigingModel::predict(const Vector& theta, bool with_gradient) const {
  const int L = size();
  const int d = static_cast<int>(points_.cols());
  Vector r(L);
  for (int l = 0; l < L; ++l) r[l] = kernel_eval(kernel_, beta_, theta, points_.row(l).transpose());
  KrigingPrediction p;
  p.mean = mu_ + r.dot(alpha_);
  Vector u = llt_.solve(r);
  double gap = 1.0 - w1_.dot(r);
  double s2 = 1.0 - r.dot(u) + gap * gap / one_w1_;
  if (s2 < 0.0) {
    // round-off from a nearly singular R; anything larger is a real failure
    if (s2 < -1e-6) throw IllConditionedError();
    s2 = 0.0;
  }
  p.s2 = s2;
  if (with_gradient) {
    Matrix Q(d, L);
    for (int l = 0; l < L; ++l) Q.col(l) = kernel_gradient(kernel_, beta_, theta, points_.row(l).transpose());
    p.grad_mean = Q * alpha_;
    p.grad_s2 = -2.0 * (Q * u) - 2.0 * gap / one_w1_ * (Q * w1_);
  }
  return p;
}

double KrigingModel::mean(const Vector& theta) const {
  double v = mu_;
  for (int l = 0; l < size(); ++l) v += alpha_[l] * kernel_eval(kernel_, beta_, theta, points_.row(l).transpose());
  return v;
}

}  // namespace calproj
