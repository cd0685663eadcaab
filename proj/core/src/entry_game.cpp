#include "calproj/entry_game.hpp"

#include "calproj/normal.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace calproj {

EntryDgp parse_entry_dgp(const std::string& name) {
  if (name == "set1") return EntryDgp::set1;
  if (name == "set2-dgp1") return EntryDgp::set2_dgp1;
  if (name == "set2-dgp2") return EntryDgp::set2_dgp2;
  if (name == "set2-dgp3") return EntryDgp::set2_dgp3;
  throw Error("unknown entry game dgp: " + name);
}

std::string entry_dgp_name(EntryDgp dgp) {
  switch (dgp) {
    case EntryDgp::set1: return "set1";
    case EntryDgp::set2_dgp1: return "set2-dgp1";
    case EntryDgp::set2_dgp2: return "set2-dgp2";
    case EntryDgp::set2_dgp3: return "set2-dgp3";
  }
  return "set1";
}

namespace {

// covariate signs (s1, s2) for the four Set 2 support points
constexpr int kSign1[4] = {-1, -1, 1, 1};
constexpr int kSign2[4] = {-1, 1, -1, 1};

struct Cdf2 {
  double v, dx, dy, dr;
};

double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

double marginal(double x, bool uniform) { return uniform ? clip01(x) : normal::cdf(x); }
double marginal_density(double x, bool uniform) {
  if (uniform) return x > 0.0 && x < 1.0 ? 1.0 : 0.0;
  return normal::pdf(x);
}

Cdf2 joint(double x, double y, double r, bool uniform) {
  if (uniform) {
    double fx = clip01(x), fy = clip01(y);
    return {fx * fy, marginal_density(x, true) * fy, fx * marginal_density(y, true), 0.0};
  }
  if (r == 0.0) {
    double fx = normal::cdf(x), fy = normal::cdf(y);
    return {fx * fy, normal::pdf(x) * fy, fx * normal::pdf(y), normal::pdf(x) * normal::pdf(y)};
  }
  double s = std::sqrt(1.0 - r * r);
  return {normal::bvn_cdf(x, y, r), normal::pdf(x) * normal::cdf((y - r * x) / s),
          normal::pdf(y) * normal::cdf((x - r * y) / s), normal::bvn_pdf(x, y, r)};
}

}  // namespace

EntryGame::EntryGame(EntryDgp dgp) : dgp_(dgp) {
  if (dgp == EntryDgp::set1) {
    pz_ = Vector::Constant(4, 0.25);
    theta0_.resize(5);
    theta0_ << 0.4, 0.6, 0.1, 0.2, 0.3;
    mu_ = 0.6;
    return;
  }
  pz_.resize(4);
  pz_ << 0.1, 0.2, 0.3, 0.4;
  mu_ = 0.5;
  const double delta2 = dgp == EntryDgp::set2_dgp1 ? -1.0 : -0.75;
  theta0_.resize(dgp == EntryDgp::set2_dgp3 ? 9 : 8);
  theta0_.head(8) << 0.5, 0.25, 0.5, 0.25, -1.0, delta2, -1.0, delta2;
  if (dgp == EntryDgp::set2_dgp3) theta0_[8] = 0.5;
}

int EntryGame::dim() const {
  switch (dgp_) {
    case EntryDgp::set1: return 5;
    case EntryDgp::set2_dgp3: return 9;
    default: return 8;
  }
}

Box EntryGame::box() const {
  const int d = dim();
  if (dgp_ == EntryDgp::set1) return Box(Vector::Zero(d), Vector::Ones(d));
  Vector lo(d), hi(d);
  lo.head(4).setConstant(-1.0);
  hi.head(4).setConstant(2.0);
  lo.segment(4, 4).setConstant(-2.0);
  hi.segment(4, 4).setConstant(0.0);
  if (d == 9) {
    lo[8] = 0.0;
    hi[8] = 0.85;
  }
  return Box(lo, hi);
}

std::vector<std::string> EntryGame::parameter_names() const {
  if (dgp_ == EntryDgp::set1) return {"delta1", "delta2", "zeta1", "zeta2", "zeta3"};
  std::vector<std::string> n = {"zeta1_1", "zeta1_2", "zeta2_1", "zeta2_2",
                                "Delta1_1", "Delta1_2", "Delta2_1", "Delta2_2"};
  if (dim() == 9) n.push_back("r");
  return n;
}

EntryGame::Index EntryGame::index(const Vector& theta, int z) const {
  if (theta.size() != dim()) throw Error("entry game parameter has the wrong dimension");
  Index ix;
  ix.jac = Eigen::Matrix<double, 5, Eigen::Dynamic>::Zero(5, dim());
  if (dgp_ == EntryDgp::set1) {
    double zeta = z == 0 ? 0.0 : theta[1 + z];
    ix.a1 = -zeta;
    ix.b1 = theta[0] - zeta;
    ix.a2 = -zeta;
    ix.b2 = theta[1] - zeta;
    ix.r = 0.0;
    ix.jac(1, 0) = 1.0;
    ix.jac(3, 1) = 1.0;
    if (z > 0)
      for (int row = 0; row < 4; ++row) ix.jac(row, 1 + z) = -1.0;
    return ix;
  }
  const double s1 = kSign1[z], s2 = kSign2[z];
  ix.a1 = -(theta[0] + s1 * theta[1]);
  ix.b1 = ix.a1 - (theta[4] + s1 * theta[5]);
  ix.a2 = -(theta[2] + s2 * theta[3]);
  ix.b2 = ix.a2 - (theta[6] + s2 * theta[7]);
  ix.r = dim() == 9 ? theta[8] : r_fixed_;
  ix.jac(0, 0) = -1.0;
  ix.jac(0, 1) = -s1;
  ix.jac(1, 0) = -1.0;
  ix.jac(1, 1) = -s1;
  ix.jac(1, 4) = -1.0;
  ix.jac(1, 5) = -s1;
  ix.jac(2, 2) = -1.0;
  ix.jac(2, 3) = -s2;
  ix.jac(3, 2) = -1.0;
  ix.jac(3, 3) = -s2;
  ix.jac(3, 6) = -1.0;
  ix.jac(3, 7) = -s2;
  if (dim() == 9) ix.jac(4, 8) = 1.0;
  return ix;
}

void EntryGame::cell_with_gradient(const Index& ix, EntryCell& c, Eigen::Matrix<double, 4, 5>* grad) const {
  const bool u = uniform_shocks();
  Cdf2 aa = joint(ix.a1, ix.a2, ix.r, u);
  Cdf2 bb = joint(ix.b1, ix.b2, ix.r, u);
  Cdf2 ab = joint(ix.a1, ix.b2, ix.r, u);
  Cdf2 ba = joint(ix.b1, ix.a2, ix.r, u);
  const double Fb1 = marginal(ix.b1, u), Fb2 = marginal(ix.b2, u);
  c.p00 = aa.v;
  c.p11 = 1.0 - Fb1 - Fb2 + bb.v;
  c.upper01 = Fb1 - ba.v;
  c.mult = bb.v - ab.v - ba.v + aa.v;
  if (!grad) return;
  const double fb1 = marginal_density(ix.b1, u), fb2 = marginal_density(ix.b2, u);
  Eigen::Matrix<double, 4, 5>& g = *grad;
  g.setZero();
  // columns: a1, b1, a2, b2, r
  g(0, 0) = aa.dx;
  g(0, 2) = aa.dy;
  g(0, 4) = aa.dr;
  g(1, 1) = -fb1 + bb.dx;
  g(1, 3) = -fb2 + bb.dy;
  g(1, 4) = bb.dr;
  g(2, 1) = fb1 - ba.dx;
  g(2, 2) = -ba.dy;
  g(2, 4) = -ba.dr;
  g(3, 0) = aa.dx - ab.dx;
  g(3, 1) = bb.dx - ba.dx;
  g(3, 2) = aa.dy - ba.dy;
  g(3, 3) = bb.dy - ab.dy;
  g(3, 4) = bb.dr - ab.dr - ba.dr + aa.dr;
}

EntryCell EntryGame::cell(const Vector& theta, int z) const {
  EntryCell c;
  cell_with_gradient(index(theta, z), c, nullptr);
  return c;
}

Vector EntryGame::model_part(const Vector& theta) const {
  Vector v(J1() + J2());
  for (int z = 0; z < 4; ++z) {
    EntryCell c = cell(theta, z);
    v[z] = c.upper01 * pz_[z];
    v[4 + z] = -(c.upper01 - c.mult) * pz_[z];
    if (uniform_shocks()) {
      v[8 + z] = c.p11 * pz_[z];
    } else {
      v[8 + z] = c.p00 * pz_[z];
      v[12 + z] = c.p11 * pz_[z];
    }
  }
  return v;
}

Matrix EntryGame::model_part_jacobian(const Vector& theta) const {
  Matrix Jm = Matrix::Zero(J1() + J2(), dim());
  for (int z = 0; z < 4; ++z) {
    Index ix = index(theta, z);
    EntryCell c;
    Eigen::Matrix<double, 4, 5> g;
    cell_with_gradient(ix, c, &g);
    Matrix gt = g * ix.jac;  // rows: p00, p11, upper01, mult
    Jm.row(z) = pz_[z] * gt.row(2);
    Jm.row(4 + z) = -pz_[z] * (gt.row(2) - gt.row(3));
    if (uniform_shocks()) {
      Jm.row(8 + z) = pz_[z] * gt.row(1);
    } else {
      Jm.row(8 + z) = pz_[z] * gt.row(0);
      Jm.row(12 + z) = pz_[z] * gt.row(1);
    }
  }
  return Jm;
}

Matrix EntryGame::data_part(const Matrix& data) const {
  if (data.cols() < 3) throw Error("entry game data needs columns y1, y2, z");
  const int n = static_cast<int>(data.rows());
  Matrix H = Matrix::Zero(n, J1() + J2());
  for (int i = 0; i < n; ++i) {
    const int y1 = static_cast<int>(std::lround(data(i, 0)));
    const int y2 = static_cast<int>(std::lround(data(i, 1)));
    const int z = static_cast<int>(std::lround(data(i, 2)));
    if (z < 0 || z > 3 || (y1 != 0 && y1 != 1) || (y2 != 0 && y2 != 1))
      throw Error("entry game data row " + std::to_string(i) + " is out of range");
    if (y1 == 0 && y2 == 1) {
      H(i, z) = 1.0;
      H(i, 4 + z) = -1.0;
    }
    if (uniform_shocks()) {
      if (y1 == 1 && y2 == 1) H(i, 8 + z) = 1.0;
    } else {
      if (y1 == 0 && y2 == 0) H(i, 8 + z) = 1.0;
      if (y1 == 1 && y2 == 1) H(i, 12 + z) = 1.0;
    }
  }
  return H;
}

Vector EntryGame::population_moments(const Vector& theta) const {
  Vector eh(J1() + J2());
  for (int z = 0; z < 4; ++z) {
    EntryCell c = cell(theta0_, z);
    eh[z] = c.p01(mu_) * pz_[z];
    eh[4 + z] = -c.p01(mu_) * pz_[z];
    if (uniform_shocks()) {
      eh[8 + z] = c.p11 * pz_[z];
    } else {
      eh[8 + z] = c.p00 * pz_[z];
      eh[12 + z] = c.p11 * pz_[z];
    }
  }
  return eh - model_part(theta);
}

MomentModel EntryGame::moment_model() const {
  EntryGame g = *this;
  return MomentModel::separable(
      "entry-" + entry_dgp_name(dgp_), J1(), J2(), box(), [g](const Matrix& x) { return g.data_part(x); },
      [g](const Vector& t) { return g.model_part(t); }, [g](const Vector& t) { return g.model_part_jacobian(t); },
      4);
}

Matrix EntryGame::simulate(int n, std::uint64_t seed) const {
  if (n < 1) throw Error("simulate needs n >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss;
  std::discrete_distribution<int> pick(pz_.data(), pz_.data() + pz_.size());
  const double r = dim() == 9 ? theta0_[8] : r_fixed_;
  const double s = std::sqrt(1.0 - r * r);
  Index ix[4] = {index(theta0_, 0), index(theta0_, 1), index(theta0_, 2), index(theta0_, 3)};
  Matrix data(n, 3);
  for (int i = 0; i < n; ++i) {
    const int z = pick(rng);
    double u1, u2;
    if (uniform_shocks()) {
      u1 = unif(rng);
      u2 = unif(rng);
    } else {
      double e1 = gauss(rng), e2 = gauss(rng);
      u1 = e1;
      u2 = r * e1 + s * e2;
    }
    const Index& x = ix[z];
    const bool eq00 = u1 < x.a1 && u2 < x.a2;
    const bool eq11 = u1 >= x.b1 && u2 >= x.b2;
    const bool eq01 = u1 < x.b1 && u2 >= x.a2;
    const bool eq10 = u1 >= x.a1 && u2 < x.b2;
    const double sel = unif(rng);
    int y1, y2;
    if (eq01 && eq10) {
      y1 = sel < mu_ ? 0 : 1;
      y2 = 1 - y1;
    } else if (eq01) {
      y1 = 0, y2 = 1;
    } else if (eq10) {
      y1 = 1, y2 = 0;
    } else if (eq11) {
      y1 = 1, y2 = 1;
    } else if (eq00) {
      y1 = 0, y2 = 0;
    } else {
      throw Error("no pure-strategy equilibrium");
    }
    data(i, 0) = y1;
    data(i, 1) = y2;
    data(i, 2) = z;
  }
  return data;
}

std::vector<std::optional<std::pair<double, double>>> EntryGame::true_bounds() const {
  using B = std::optional<std::pair<double, double>>;
  switch (dgp_) {
    case EntryDgp::set1:
      return {B({0.3872, 0.4239}), B({0.5834, 0.6084}), B({0.0996, 0.1006}), B({0.1994, 0.2010}),
              B({0.2992, 0.3014})};
    case EntryDgp::set2_dgp1: {
      std::vector<B> out;
      for (int k = 0; k < dim(); ++k) out.push_back(B({theta0_[k], theta0_[k]}));
      return out;
    }
    case EntryDgp::set2_dgp2:
      return {B({0.405, 0.589}), B({0.236, 0.266}), std::nullopt, std::nullopt,
              B({-1.158, -0.832}), B({-0.790, -0.716}), std::nullopt, std::nullopt};
    case EntryDgp::set2_dgp3: return std::vector<B>(9);
  }
  return {};
}

}  // namespace calproj
