#include "calproj/slp.hpp"

#include "calproj/linprog.hpp"

#include <algorithm>
#include <cmath>

namespace calproj {

double slp_merit(const Vector& f, const Vector& h, double penalty) {
  double m = f.size() > 0 ? f.minCoeff() : 0.0;
  if (std::isnan(m)) return -kInf;
  for (int i = 0; i < h.size(); ++i) {
    if (std::isnan(h[i])) return -kInf;
    m -= penalty * std::max(h[i], 0.0);
  }
  return m;
}

SlpResult slp_maximize(const SlpProblem& problem, const Vector& x0, const SlpOptions& opt) {
  const int d = static_cast<int>(x0.size());
  const Vector width = (problem.upper - problem.lower).cwiseMax(1e-12);
  SlpResult res;
  res.x = x0.cwiseMax(problem.lower).cwiseMin(problem.upper);
  Vector f, h;
  Matrix df, dh;
  problem.evaluate(res.x, f, df, h, dh);
  res.merit = slp_merit(f, h, opt.penalty);
  if (!std::isfinite(res.merit)) return res;

  double radius = opt.radius;
  for (int it = 0; it < opt.max_iter && radius >= opt.min_radius; ++it) {
    res.iterations = it + 1;
    const int nf = static_cast<int>(f.size());
    const int nh = static_cast<int>(h.size());
    // variables: step (d), t, slacks (nh)
    const int nv = d + 1 + nh;
    LinearSystem lp;
    lp.A = Matrix::Zero(nf + nh, nv);
    lp.b.resize(nf + nh);
    for (int k = 0; k < nf; ++k) {
      lp.A.block(k, 0, 1, d) = -df.row(k);
      lp.A(k, d) = 1.0;
      lp.b[k] = f[k];
    }
    for (int i = 0; i < nh; ++i) {
      lp.A.block(nf + i, 0, 1, d) = dh.row(i);
      lp.A(nf + i, d + 1 + i) = -1.0;
      lp.b[nf + i] = -h[i];
    }
    lp.lower.resize(nv);
    lp.upper.resize(nv);
    for (int k = 0; k < d; ++k) {
      lp.lower[k] = std::max(problem.lower[k] - res.x[k], -radius * width[k]);
      lp.upper[k] = std::min(problem.upper[k] - res.x[k], radius * width[k]);
    }
    lp.lower[d] = nf > 0 ? -kInf : 0.0;
    lp.upper[d] = nf > 0 ? kInf : 0.0;
    for (int i = 0; i < nh; ++i) {
      lp.lower[d + 1 + i] = 0.0;
      lp.upper[d + 1 + i] = kInf;
    }
    Vector c = Vector::Zero(nv);
    c[d] = 1.0;
    for (int i = 0; i < nh; ++i) c[d + 1 + i] = -opt.penalty;
    LpResult sol;
    try {
      sol = maximize(c, lp);
    } catch (const SimplexStallError&) {
      break;
    }
    if (sol.status != LpStatus::optimal) break;
    const double predicted = sol.value - res.merit;
    if (predicted <= opt.tol * (1.0 + std::abs(res.merit))) break;
    Vector step = sol.x.head(d);
    Vector trial = (res.x + step).cwiseMax(problem.lower).cwiseMin(problem.upper);
    Vector tf, th;
    Matrix tdf, tdh;
    problem.evaluate(trial, tf, tdf, th, tdh);
    double tm = slp_merit(tf, th, opt.penalty);
    double ratio = std::isfinite(tm) ? (tm - res.merit) / predicted : -1.0;
    bool at_edge = (step.cwiseAbs().array() >= 0.99 * radius * width.array()).any();
    if (ratio > 0.1) {
      res.x = trial;
      res.merit = tm;
      f = tf;
      df = tdf;
      h = th;
      dh = tdh;
      if (ratio > 0.75 && at_edge) radius = std::min(2.0 * radius, opt.max_radius);
    } else {
      radius = 0.25 * std::min(radius, step.cwiseQuotient(width).cwiseAbs().maxCoeff());
    }
  }
  return res;
}

}  // namespace calproj
