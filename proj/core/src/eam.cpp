#include "calproj/eam.hpp"

#include "calproj/normal.hpp"
#include "calproj/parallel.hpp"
#include "calproj/slp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace calproj {

Objective Objective::linear(const Vector& p) {
  Objective o;
  o.p = p;
  return o;
}

Objective Objective::smooth(std::function<double(const Vector&)> f, std::function<Vector(const Vector&)> grad) {
  Objective o;
  o.f = std::move(f);
  o.grad = std::move(grad);
  return o;
}

double Objective::value(const Vector& theta) const { return is_linear() ? p.dot(theta) : f(theta); }

Vector Objective::gradient(const Vector& theta) const { return is_linear() ? p : grad(theta); }

Objective Objective::negated() const {
  if (is_linear()) return linear(-p);
  auto f0 = f;
  auto g0 = grad;
  return smooth([f0](const Vector& t) { return -f0(t); }, [g0](const Vector& t) { return Vector(-g0(t)); });
}

ConstraintSet ConstraintSet::from_sample(const MomentSample& sample) {
  ConstraintSet c;
  c.values = [&sample](const Vector& t) { return sample.moments(t).outer; };
  c.jacobian = [&sample](const Vector& t) { return sample.outer_jacobian(t); };
  return c;
}

void EamState::add(const Vector& theta, double c, double g, double obj, double feas_tol) {
  const int L = size();
  points.conservativeResize(L + 1, theta.size());
  points.row(L) = theta.transpose();
  cvals.conservativeResize(L + 1);
  cvals[L] = c;
  gmax.conservativeResize(L + 1);
  gmax[L] = g;
  objective.conservativeResize(L + 1);
  objective[L] = obj;
  bool ok = g <= c + feas_tol;
  feasible.push_back(ok);
  if (ok && (star < 0 || obj > objective[star])) star = L;
}

Matrix initialize_points(const Box& box, int k, std::uint64_t seed) {
  const int d = box.dim();
  Matrix X(k, d);
  std::mt19937_64 rng(derive_seed(seed, 0x696e6974ULL));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = box.lower[j] + u(rng) * (box.upper[j] - box.lower[j]);
  return X;
}

namespace {

Vector uniform_point(const Box& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector x(box.dim());
  for (int j = 0; j < box.dim(); ++j) x[j] = box.lower[j] + u(rng) * (box.upper[j] - box.lower[j]);
  return x;
}

// Smallest objective value over the box (exact for linear objectives).
double objective_floor(const Box& box, const Objective& obj) {
  if (obj.is_linear()) {
    double v = 0.0;
    for (int k = 0; k < box.dim(); ++k) v += std::min(obj.p[k] * box.lower[k], obj.p[k] * box.upper[k]);
    return v;
  }
  std::mt19937_64 rng(0x666c6f6f72ULL);
  double v = obj.value(box.center());
  for (int i = 0; i < 2000; ++i) v = std::min(v, obj.value(uniform_point(box, rng)));
  return v;
}

// Points found by the local search sit on g_j = c_L up to rounding.
constexpr double kBoundaryTol = 1e-9;

double surrogate_scale(const KrigingModel& model, double s2) {
  return std::sqrt(std::max(model.varsigma2_hat(), 0.0)) * std::sqrt(std::max(s2, 0.0));
}

// Evaluates the M-step pieces. Soft mode: f_j = log a + log Phi(-z_j).
// Hard mode (no surrogate uncertainty): f = a, h_j = g_j - c_L.
struct MStepPieces {
  const EamProblem& problem;
  const KrigingModel& model;
  double incumbent;
  bool hard;

  void operator()(const Vector& x, Vector& f, Matrix& df, Vector& h, Matrix& dh) const {
    const int d = static_cast<int>(x.size());
    double a = problem.objective.value(x) - incumbent;
    Vector da = problem.objective.gradient(x);
    Vector g = problem.constraints.values(x);
    Matrix dg = problem.constraints.jacobian(x);
    KrigingPrediction pr = model.predict(x, true);
    const int J = static_cast<int>(g.size());
    if (hard) {
      f.resize(1);
      df.resize(1, d);
      f[0] = a;
      df.row(0) = da.transpose();
      h = g.array() - pr.mean;
      dh = dg.rowwise() - pr.grad_mean.transpose();
      return;
    }
    h.resize(0);
    dh.resize(0, d);
    f.resize(J);
    df.resize(J, d);
    if (!(a > 0.0)) {
      f.setConstant(-kInf);
      df.setZero();
      return;
    }
    const double la = std::log(a);
    const Vector dla = da / a;
    const double ss = surrogate_scale(model, pr.s2);
    if (!(ss > 1e-300)) {
      for (int j = 0; j < J; ++j) f[j] = g[j] <= pr.mean + kBoundaryTol ? la : -kInf;
      df.rowwise() = dla.transpose();
      return;
    }
    const double sigma = std::sqrt(model.varsigma2_hat());
    const Vector dss = sigma * pr.grad_s2 / (2.0 * std::sqrt(pr.s2));
    for (int j = 0; j < J; ++j) {
      double z = (g[j] - pr.mean) / ss;
      Vector dz = (dg.row(j).transpose() - pr.grad_mean) / ss - z * dss / ss;
      f[j] = la + normal::log_cdf(-z);
      df.row(j) = (dla - normal::mills_ratio(-z) * dz).transpose();
    }
  }

  double merit(const Vector& x) const {
    Vector f, h;
    Matrix df, dh;
    (*this)(x, f, df, h, dh);
    return slp_merit(f, h, 1e3);
  }
};

bool surrogate_is_flat(const KrigingModel& model) { return !(model.varsigma2_hat() > 1e-20); }

}  // namespace

double expected_improvement(const Vector& theta, const KrigingModel& model, double incumbent, double gbar,
                            const Objective& objective) {
  double a = objective.value(theta) - incumbent;
  if (!(a > 0.0)) return 0.0;
  KrigingPrediction pr = model.predict(theta, false);
  double ss = surrogate_scale(model, pr.s2);
  if (surrogate_is_flat(model) || !(ss > 0.0)) return gbar <= pr.mean + kBoundaryTol ? a : 0.0;
  return a * normal::cdf(-(gbar - pr.mean) / ss);
}

Proposal m_step(const EamProblem& problem, const KrigingModel& model, const EamState& state, const EamOptions& opt,
                std::uint64_t seed) {
  const Box& box = problem.box;
  const int d = box.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const bool explore = u01(rng) < opt.epsilon;
  const Vector random_point = uniform_point(box, rng);

  const double incumbent = state.star >= 0 ? state.incumbent() : objective_floor(box, problem.objective);
  const bool hard = surrogate_is_flat(model);
  MStepPieces pieces{problem, model, incumbent, hard};

  // candidate starts
  std::vector<Vector> cands;
  cands.reserve(opt.probes + 64);
  for (int i = 0; i < opt.probes; ++i) cands.push_back(uniform_point(box, rng));
  std::vector<int> order(state.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> seeds_idx;
  if (state.star >= 0) {
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (state.feasible[a] != state.feasible[b]) return static_cast<bool>(state.feasible[a]);
      return state.objective[a] > state.objective[b];
    });
  } else {
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return state.gmax[a] - state.cvals[a] < state.gmax[b] - state.cvals[b];
    });
  }
  for (int i = 0; i < std::min<int>(5, static_cast<int>(order.size())); ++i) seeds_idx.push_back(order[i]);
  std::normal_distribution<double> z;
  const Vector w = box.width();
  for (int idx : seeds_idx) {
    Vector base = state.points.row(idx).transpose();
    if (hard) cands.push_back(base);
    for (double scale : {0.005, 0.02, 0.1}) {
      for (int rep = 0; rep < 3; ++rep) {
        Vector x = base;
        for (int k = 0; k < d; ++k) x[k] += scale * w[k] * z(rng);
        cands.push_back(box.clamp(x));
      }
    }
  }

  std::vector<std::pair<double, int>> ranked;
  ranked.reserve(cands.size());
  for (int i = 0; i < static_cast<int>(cands.size()); ++i) {
    double m = pieces.merit(cands[i]);
    if (std::isfinite(m)) ranked.emplace_back(m, i);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  SlpProblem slp;
  slp.lower = box.lower;
  slp.upper = box.upper;
  slp.evaluate = pieces;
  SlpOptions so;
  so.max_iter = 40;

  Vector best;
  double best_merit = -kInf;
  std::vector<Vector> used;
  auto try_start = [&](const Vector& x0) {
    used.push_back(x0);
    SlpResult r = slp_maximize(slp, x0, so);
    if (r.merit > best_merit) {
      best_merit = r.merit;
      best = r.x;
    }
  };
  // The log-EI is -inf at the incumbent itself, so walk from it to the
  // surrogate frontier first and start the soft search along that segment.
  if (state.star >= 0 && !hard) {
    SlpProblem frontier = slp;
    frontier.evaluate = MStepPieces{problem, model, incumbent, true};
    const Vector star = state.points.row(state.star).transpose();
    const Vector edge = slp_maximize(frontier, star, so).x;
    if (problem.objective.value(edge) > incumbent)
      for (double t : {1.0, 0.5, 0.1}) {
        Vector x0 = star + t * (edge - star);
        if (std::isfinite(pieces.merit(x0))) try_start(x0);
      }
  }
  const int forced = static_cast<int>(used.size());
  for (const auto& [m, i] : ranked) {
    if (static_cast<int>(used.size()) - forced >= opt.local_starts) break;
    bool near = false;
    for (const Vector& v : used)
      if (((v - cands[i]).cwiseQuotient(w)).cwiseAbs().maxCoeff() < 1e-3) near = true;
    if (!near) try_start(cands[i]);
  }

  Proposal out;
  double ei = 0.0;
  if (best.size() == d) {
    Vector g = problem.constraints.values(best);
    ei = expected_improvement(best, model, incumbent, g.maxCoeff(), problem.objective);
  }
  if (!(ei > 0.0)) {
    out.theta = random_point;
    out.maximizer = state.star >= 0 ? Vector(state.points.row(state.star).transpose()) : random_point;
    out.ei = 0.0;
    out.random_draw = true;
    return out;
  }
  out.maximizer = best;
  out.ei = ei;
  out.theta = explore ? random_point : best;
  out.random_draw = explore;
  return out;
}

EamResult run_direction(const EamProblem& problem, const EamOptions& opt) {
  const Box& box = problem.box;
  const int d = box.dim();
  if (!(opt.epsilon >= 0.0 && opt.epsilon < 1.0 + 1e-12)) throw Error("epsilon must lie in [0, 1]");
  if (!(opt.conv_tol > 0.0)) throw Error("conv_tol must be positive");
  const int k = opt.k > 0 ? opt.k : 10 * d + 1;
  EamResult res;
  EamState& state = res.state;

  auto evaluate = [&](const Vector& theta, double& c, double& g) {
    g = problem.constraints.values(theta).maxCoeff();
    c = problem.critical(theta);
  };

  Matrix init = initialize_points(box, k, opt.seed);
  std::vector<double> cv(k), gv(k);
  parallel_for(k, opt.threads, [&](int i) { evaluate(init.row(i).transpose(), cv[i], gv[i]); });
  for (int i = 0; i < k; ++i) {
    Vector t = init.row(i).transpose();
    state.add(t, cv[i], gv[i], problem.objective.value(t), opt.feas_tol);
  }

  KrigingOptions kopt = KrigingOptions::for_box(box, opt.kernel);
  kopt.seed = derive_seed(opt.seed, 0x41ULL);
  Vector beta;
  int stall = 0;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    // A-step
    KrigingModel model = [&] {
      const bool full = beta.size() == 0 || opt.refit_every <= 1 || it % opt.refit_every == 0;
      if (!full) {
        try {
          KrigingModel m =
              KrigingModel::fit_fixed(state.points, state.cvals, beta, opt.kernel, kopt.nugget, kopt.max_nugget);
          if (m.relative_interpolation_error() <= kopt.interpolation_tol) return m;
        } catch (const IllConditionedError&) {
        }
      }
      KrigingOptions o = kopt;
      if (beta.size() > 0) {
        o.starts = 3;
        o.max_evaluations = 60;
        o.initial_step = 0.5;
      }
      o.seed = derive_seed(kopt.seed, static_cast<std::uint64_t>(it));
      return KrigingModel::fit(state.points, state.cvals, o, beta);
    }();
    beta = model.beta();

    // M-step
    Proposal prop = m_step(problem, model, state, opt, derive_seed(opt.seed, 0x1000ULL + static_cast<std::uint64_t>(it)));
    EamIteration rec;
    rec.L = state.size();
    rec.incumbent = state.incumbent();
    rec.ei_max = prop.ei;
    rec.proposal = prop.theta;
    rec.random_draw = prop.random_draw;
    state.history.push_back(rec);

    if (state.star >= 0) {
      const double inc = state.incumbent();
      bool pass = prop.ei <= opt.conv_tol * (1.0 + std::abs(inc)) &&
                  std::abs(problem.objective.value(prop.maximizer) - inc) <= opt.conv_tol;
      stall = pass ? stall + 1 : 0;
      if (stall >= opt.min_stall) {
        res.converged = true;
        break;
      }
    }

    // E-step
    double c, g;
    evaluate(prop.theta, c, g);
    state.add(prop.theta, c, g, problem.objective.value(prop.theta), opt.feas_tol);
  }
  res.iterations = it;
  if (state.star >= 0) {
    res.empty = false;
    res.endpoint = state.incumbent();
    res.theta = state.points.row(state.star).transpose();
  }
  return res;
}

namespace {

CiResult run_pair(const EamProblem& upper, const EamProblem& lower, const CiOptions& opt, std::uint64_t seed) {
  CiResult out;
  EamOptions eu = opt.eam, el = opt.eam;
  eu.seed = derive_seed(seed, 1);
  el.seed = derive_seed(seed, 2);
  EamResult ru, rl;
  parallel_for(2, opt.threads, [&](int i) {
    if (i == 0)
      ru = run_direction(upper, eu);
    else
      rl = run_direction(lower, el);
  });
  out.upper_run = std::move(ru);
  out.lower_run = std::move(rl);
  out.empty = out.upper_run.empty || out.lower_run.empty;
  if (out.empty) {
    out.lower = kInf;
    out.upper = -kInf;
  } else {
    out.upper = out.upper_run.endpoint;
    out.lower = -out.lower_run.endpoint;
  }
  return out;
}

std::shared_ptr<CriticalValueFunction> make_cvf(const MomentSample& sample, const CiOptions& opt,
                                                const Localization& loc) {
  if (opt.mode == CalibrationMode::constant)
    return std::make_shared<CriticalValueFunction>(CriticalValueFunction::constant_value(sample, opt.constant));
  CalibrationSettings s;
  s.gms = opt.gms;
  s.rho = opt.rho;
  s.localization = loc;
  return std::make_shared<CriticalValueFunction>(
      sample, BootstrapDraws::generate(sample.n(), opt.B, opt.bootstrap, opt.seed), opt.mode, opt.alpha, s, opt.root);
}

}  // namespace

CiResult confidence_interval(const MomentSample& sample, const Vector& p, const CiOptions& opt) {
  if (p.size() != sample.model().dim()) throw Error("direction has the wrong dimension");
  double norm = p.norm();
  if (!(norm > 0.0)) throw Error("direction must be non-zero");
  return confidence_interval(sample, Objective::linear(p / norm), opt);
}

CiResult confidence_interval(const MomentSample& sample, const Objective& f, const CiOptions& opt) {
  auto cvf = make_cvf(sample, opt, Localization{});
  auto direction = [f](const Vector& theta) {
    Vector g = f.gradient(theta);
    double n = g.norm();
    return n > 0.0 ? Vector(g / n) : g;
  };
  EamProblem up;
  up.box = sample.model().box();
  up.objective = f;
  up.constraints = ConstraintSet::from_sample(sample);
  EamProblem lo = up;
  lo.objective = f.negated();
  const bool one_sided = opt.mode == CalibrationMode::one_sided;
  up.critical = [cvf, direction](const Vector& t) { return (*cvf)(t, direction(t)); };
  lo.critical = [cvf, direction, one_sided](const Vector& t) {
    Vector q = direction(t);
    return (*cvf)(t, one_sided ? Vector(-q) : q);
  };
  return run_pair(up, lo, opt, opt.eam.seed ^ opt.seed);
}

std::vector<CiResult> joint_confidence_box(const MomentSample& sample, const Matrix& directions, const CiOptions& opt) {
  if (opt.mode == CalibrationMode::one_sided) throw Error("joint intervals need the two-sided calibration");
  Matrix P = directions;
  for (int i = 0; i < P.rows(); ++i) P.row(i).normalize();
  auto cvf = make_cvf(sample, opt, Localization::joint(P));
  std::vector<CiResult> out;
  for (int i = 0; i < P.rows(); ++i) {
    EamProblem up;
    up.box = sample.model().box();
    up.objective = Objective::linear(P.row(i).transpose());
    up.constraints = ConstraintSet::from_sample(sample);
    up.critical = [cvf](const Vector& t) { return (*cvf)(t, Vector()); };
    EamProblem lo = up;
    lo.objective = up.objective.negated();
    out.push_back(run_pair(up, lo, opt, derive_seed(opt.eam.seed ^ opt.seed, 100 + i)));
  }
  return out;
}

}  // namespace calproj
