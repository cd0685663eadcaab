#include "calproj/moment_model.hpp"

#include <algorithm>
#include <cmath>

namespace calproj {

double GmsConfig::kappa_for(int n) const {
  if (kappa > 0.0) return kappa;
  const double dn = std::max(n, 3);
  switch (rule) {
    case KappaRule::sqrt_log_n: return std::sqrt(std::log(dn));
    case KappaRule::n_pow_one_seventh: return std::pow(dn, 1.0 / 7.0);
    case KappaRule::sqrt_log_log_n: return std::sqrt(std::max(std::log(std::log(dn)), 1e-12));
  }
  return std::sqrt(std::log(dn));
}

double gms_function(GmsKind kind, double xi) {
  switch (kind) {
    case GmsKind::hard_threshold: return xi >= -1.0 ? 0.0 : -kInf;
    case GmsKind::smooth_threshold:
      if (xi >= -1.0) return 0.0;
      if (xi <= -2.0) return -kInf;
      return (xi + 1.0) / (xi + 2.0);
    case GmsKind::truncated_linear: return std::min(xi, 0.0);
    case GmsKind::linear: return xi;
  }
  return 0.0;
}

MomentModel MomentModel::general(std::string name, int J1, int J2, Box box, MomentFn moments,
                                 GradientFn gradient, int paired) {
  MomentModel m;
  m.name_ = std::move(name);
  m.J1_ = J1;
  m.J2_ = J2;
  m.paired_ = paired;
  m.box_ = std::move(box);
  m.moments_ = std::move(moments);
  m.gradient_ = std::move(gradient);
  if (!m.moments_) throw Error("general moment model needs a moment function");
  m.validate();
  return m;
}

MomentModel MomentModel::separable(std::string name, int J1, int J2, Box box, DataFn h, ThetaFn v,
                                   JacobianFn v_jacobian, int paired) {
  MomentModel m;
  m.name_ = std::move(name);
  m.J1_ = J1;
  m.J2_ = J2;
  m.paired_ = paired;
  m.box_ = std::move(box);
  m.h_ = std::move(h);
  m.v_ = std::move(v);
  m.dv_ = std::move(v_jacobian);
  if (!m.h_ || !m.v_) throw Error("separable moment model needs data and parameter parts");
  m.validate();
  return m;
}

void MomentModel::validate() const {
  if (J1_ < 0 || J2_ < 0 || J1_ + J2_ == 0) throw Error("moment model needs at least one moment");
  if (paired_ < 0 || 2 * paired_ > J1_) throw Error("paired inequalities exceed J1");
  if (box_.dim() == 0) throw Error("moment model needs a non-empty parameter box");
}

Matrix MomentModel::contributions(const Matrix& data, const Vector& theta) const {
  Matrix M;
  if (is_separable()) {
    M = h_(data);
    M.rowwise() -= v_(theta).transpose();
  } else {
    M = moments_(data, theta);
  }
  if (M.rows() != data.rows() || M.cols() != base_count())
    throw Error("moment function returned a matrix of the wrong shape");
  return M;
}

Matrix MomentModel::mean_gradient(const Matrix& data, const Vector& theta) const {
  Matrix g = is_separable() ? Matrix(-dv_(theta)) : gradient_(data, theta);
  if (g.rows() != base_count() || g.cols() != dim()) throw Error("gradient has the wrong shape");
  return g;
}

namespace {

void column_stats(const Matrix& M, Vector& mean, Vector& sd) {
  const double n = static_cast<double>(M.rows());
  mean = M.colwise().sum().transpose() / n;
  sd.resize(M.cols());
  for (int j = 0; j < M.cols(); ++j) sd[j] = std::sqrt((M.col(j).array() - mean[j]).square().sum() / n);
}

void check_degenerate(const Vector& mean, const Vector& sd) {
  for (int j = 0; j < sd.size(); ++j)
    if (!(sd[j] > 1e-12 * (1.0 + std::abs(mean[j])))) throw DegenerateMomentError(j);
}

Vector mirror(const Vector& base, int J1, int J2, double sign) {
  Vector out(J1 + 2 * J2);
  out.head(J1 + J2) = base;
  out.tail(J2) = sign * base.segment(J1, J2);
  return out;
}

Matrix mirror_rows(const Matrix& base, int J1, int J2) {
  Matrix out(J1 + 2 * J2, base.cols());
  out.topRows(J1 + J2) = base;
  out.bottomRows(J2) = -base.middleRows(J1, J2);
  return out;
}

SampleMoments finish(int n, int J1, int J2, int R1, const Vector& mean, const Vector& sd) {
  SampleMoments sm;
  sm.n = n;
  sm.J1 = J1;
  sm.J2 = J2;
  sm.mbar = mirror(mean, J1, J2, -1.0);
  sm.sigma = mirror(sd, J1, J2, 1.0);
  const double rn = std::sqrt(static_cast<double>(n));
  sm.studentized = rn * sm.mbar.cwiseQuotient(sm.sigma);
  sm.pair_weight.resize(R1);
  sm.sigma_outer = sm.sigma;
  for (int j = 0; j < R1; ++j) {
    double a = sm.mbar[j] / sm.sigma[j];
    double b = sm.mbar[j + R1] / sm.sigma[j + R1];
    double mu = 1.0;
    if (a + b != 0.0) mu = 1.0 - std::clamp(a / (a + b), 0.0, 1.0);
    sm.pair_weight[j] = mu;
    double pooled = mu * sm.sigma[j] + (1.0 - mu) * sm.sigma[j + R1];
    sm.sigma_outer[j] = pooled;
    sm.sigma_outer[j + R1] = pooled;
  }
  sm.outer = rn * sm.mbar.cwiseQuotient(sm.sigma_outer);
  return sm;
}

// Central differences of f, one-sided where a step would leave the slightly
// expanded box.
template <class F>
Matrix finite_difference(const Box& box, const Vector& theta, int rows, F f) {
  const int d = static_cast<int>(theta.size());
  const Vector slack = 1e-3 * box.width();
  Matrix J(rows, d);
  for (int k = 0; k < d; ++k) {
    double h = std::max(1e-6, 1e-7 * std::abs(theta[k]));
    Vector up = theta, dn = theta;
    bool can_up = theta[k] + h <= box.upper[k] + slack[k];
    bool can_dn = theta[k] - h >= box.lower[k] - slack[k];
    if (can_up && can_dn) {
      up[k] += h;
      dn[k] -= h;
      J.col(k) = (f(up) - f(dn)) / (2.0 * h);
    } else if (can_up) {
      up[k] += h;
      J.col(k) = (f(up) - f(theta)) / h;
    } else {
      dn[k] -= h;
      J.col(k) = (f(theta) - f(dn)) / h;
    }
  }
  return J;
}

}  // namespace

MomentSample::MomentSample(MomentModel model, Matrix data) : model_(std::move(model)), data_(std::move(data)) {
  if (data_.rows() < 2) throw Error("need at least two observations");
  if (model_.is_separable()) {
    Matrix H = model_.data_part(data_);
    if (H.rows() != data_.rows() || H.cols() != model_.base_count())
      throw Error("moment data part has the wrong shape");
    column_stats(H, h_mean_, h_sigma_);
    check_degenerate(h_mean_, h_sigma_);
    h_centered_ = H.rowwise() - h_mean_.transpose();
    for (int j = 0; j < h_centered_.cols(); ++j) h_centered_.col(j) /= h_sigma_[j];
  }
}

SampleMoments MomentSample::moments(const Vector& theta) const {
  if (theta.size() != model_.dim()) throw Error("theta has the wrong dimension");
  Vector mean, sd;
  if (model_.is_separable()) {
    Vector v = model_.theta_part(theta);
    if (v.size() != model_.base_count()) throw Error("moment parameter part has the wrong size");
    mean = h_mean_ - v;
    sd = h_sigma_;
  } else {
    column_stats(model_.contributions(data_, theta), mean, sd);
    check_degenerate(mean, sd);
  }
  return finish(n(), model_.J1(), model_.J2(), model_.paired(), mean, sd);
}

Matrix MomentSample::centered(const Vector& theta) const {
  if (model_.is_separable()) return h_centered_;
  Matrix M = model_.contributions(data_, theta);
  Vector mean, sd;
  column_stats(M, mean, sd);
  check_degenerate(mean, sd);
  M.rowwise() -= mean.transpose();
  for (int j = 0; j < M.cols(); ++j) M.col(j) /= sd[j];
  return M;
}

Matrix MomentSample::raw_gradient(const Vector& theta, const SampleMoments& sm) const {
  Matrix g = model_.mean_gradient(data_, theta);
  for (int j = 0; j < g.rows(); ++j) g.row(j) /= sm.sigma[j];
  return g;
}

Matrix MomentSample::gradients(const Vector& theta) const {
  const int K = model_.base_count();
  if (model_.has_gradient()) {
    SampleMoments sm = moments(theta);
    return mirror_rows(raw_gradient(theta, sm), model_.J1(), model_.J2());
  }
  Matrix base = finite_difference(model_.box(), theta, K, [&](const Vector& t) {
    SampleMoments sm = moments(t);
    return Vector(sm.mbar.head(K).cwiseQuotient(sm.sigma.head(K)));
  });
  return mirror_rows(base, model_.J1(), model_.J2());
}

Matrix MomentSample::outer_jacobian(const Vector& theta) const {
  if (model_.has_gradient()) {
    SampleMoments sm = moments(theta);
    Matrix g = mirror_rows(model_.mean_gradient(data_, theta), model_.J1(), model_.J2());
    const double rn = std::sqrt(static_cast<double>(n()));
    for (int j = 0; j < g.rows(); ++j) g.row(j) *= rn / sm.sigma_outer[j];
    return g;
  }
  return finite_difference(model_.box(), theta, model_.J(),
                           [&](const Vector& t) { return moments(t).outer; });
}

SampleMoments studentized_moments(const MomentModel& model, const Matrix& data, const Vector& theta) {
  return MomentSample(model, data).moments(theta);
}

Vector xi_hat(const SampleMoments& sm, double kappa) {
  Vector xi = sm.studentized / kappa;
  xi.tail(2 * sm.J2).setZero();
  return xi;
}

Vector gms_apply(const GmsConfig& gms, const Vector& xi, int J1) {
  Vector phi(xi.size());
  for (int j = 0; j < xi.size(); ++j) phi[j] = j < J1 ? gms_function(gms.kind, xi[j]) : 0.0;
  return phi;
}

Matrix estimate_gradients(const MomentModel& model, const Matrix& data, const Vector& theta) {
  return MomentSample(model, data).gradients(theta);
}

}  // namespace calproj
