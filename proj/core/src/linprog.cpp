#include "calproj/linprog.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace calproj {

double LinearSystem::max_violation(const Vector& x) const {
  double v = 0.0;
  for (int k = 0; k < x.size(); ++k) {
    v = std::max(v, lower[k] - x[k]);
    v = std::max(v, x[k] - upper[k]);
  }
  for (int i = 0; i < A.rows(); ++i) {
    if (b[i] == kInf) continue;
    v = std::max(v, A.row(i).dot(x) - b[i]);
  }
  return v;
}

namespace {

enum class VarKind { shifted_lower, shifted_upper, split };

// Dense tableau in the form [T | rhs], with the reduced-cost row stored last.
class Simplex {
 public:
  Simplex(const LinearSystem& sys, const SimplexOptions& opt) : sys_(sys), opt_(opt) {}

  // Builds the phase-one tableau; returns false if infeasibility is evident.
  bool setup();
  // Runs phase one; true if feasible.
  bool phase_one();
  LpStatus phase_two(const Vector& c);
  Vector solution() const;
  int pivots() const { return pivots_; }

 private:
  double& at(int i, int j) { return t_[static_cast<std::size_t>(i) * width_ + j]; }
  double at(int i, int j) const { return t_[static_cast<std::size_t>(i) * width_ + j]; }
  double& rhs(int i) { return at(i, ncols_); }
  double rhs(int i) const { return at(i, ncols_); }
  void pivot(int r, int e);
  // Bland's rule iterations over columns [0, allowed). Returns false if unbounded.
  bool iterate(int allowed);

  const LinearSystem& sys_;
  SimplexOptions opt_;

  std::vector<VarKind> kind_;
  std::vector<int> col_of_;  // first structural column of each original variable
  int nstruct_ = 0;
  int m_ = 0;
  int nart_ = 0;
  int ncols_ = 0;
  int width_ = 0;
  std::vector<double> t_;
  std::vector<int> basis_;
  std::vector<int> art_row_;
  int pivots_ = 0;
  long cap_ = 0;
};

bool Simplex::setup() {
  const int d = sys_.dim();
  const double tol = opt_.feasibility_tol;
  kind_.resize(d);
  col_of_.resize(d);
  int extra_rows = 0;
  for (int k = 0; k < d; ++k) {
    double lo = sys_.lower[k], hi = sys_.upper[k];
    if (std::isnan(lo) || std::isnan(hi) || lo > hi + tol || lo == kInf || hi == -kInf) return false;
    col_of_[k] = nstruct_;
    if (std::isfinite(lo)) {
      kind_[k] = VarKind::shifted_lower;
      nstruct_ += 1;
      if (std::isfinite(hi)) ++extra_rows;
    } else if (std::isfinite(hi)) {
      kind_[k] = VarKind::shifted_upper;
      nstruct_ += 1;
    } else {
      kind_[k] = VarKind::split;
      nstruct_ += 2;
    }
  }

  // Collect equilibrated rows over the structural columns.
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs_values;
  rows.reserve(sys_.rows() + extra_rows);
  for (int i = 0; i < sys_.rows(); ++i) {
    double bi = sys_.b[i];
    if (bi == kInf) continue;
    if (std::isnan(bi) || bi == -kInf) return false;
    double scale = 0.0;
    for (int k = 0; k < d; ++k) scale = std::max(scale, std::abs(sys_.A(i, k)));
    if (scale == 0.0) {
      if (bi < -tol) return false;
      continue;
    }
    std::vector<double> row(nstruct_, 0.0);
    double r = bi;
    for (int k = 0; k < d; ++k) {
      double a = sys_.A(i, k) / scale;
      switch (kind_[k]) {
        case VarKind::shifted_lower:
          row[col_of_[k]] = a;
          r -= sys_.A(i, k) * sys_.lower[k];
          break;
        case VarKind::shifted_upper:
          row[col_of_[k]] = -a;
          r -= sys_.A(i, k) * sys_.upper[k];
          break;
        case VarKind::split:
          row[col_of_[k]] = a;
          row[col_of_[k] + 1] = -a;
          break;
      }
    }
    rows.push_back(std::move(row));
    rhs_values.push_back(r / scale);
  }
  for (int k = 0; k < d; ++k) {
    if (kind_[k] == VarKind::shifted_lower && std::isfinite(sys_.upper[k])) {
      std::vector<double> row(nstruct_, 0.0);
      row[col_of_[k]] = 1.0;
      rows.push_back(std::move(row));
      rhs_values.push_back(std::max(0.0, sys_.upper[k] - sys_.lower[k]));
    }
  }

  m_ = static_cast<int>(rows.size());
  nart_ = 0;
  for (double r : rhs_values)
    if (r < 0) ++nart_;
  ncols_ = nstruct_ + m_ + nart_;
  width_ = ncols_ + 1;
  t_.assign(static_cast<std::size_t>(m_ + 1) * width_, 0.0);
  basis_.assign(m_, -1);
  art_row_.clear();
  int a = 0;
  for (int i = 0; i < m_; ++i) {
    double sign = rhs_values[i] < 0 ? -1.0 : 1.0;
    for (int j = 0; j < nstruct_; ++j) at(i, j) = sign * rows[i][j];
    at(i, nstruct_ + i) = sign;
    rhs(i) = sign * rhs_values[i];
    if (sign < 0) {
      int col = nstruct_ + m_ + a++;
      at(i, col) = 1.0;
      basis_[i] = col;
      art_row_.push_back(i);
    } else {
      basis_[i] = nstruct_ + i;
    }
  }
  long size = m_ + nstruct_;
  cap_ = opt_.max_pivots > 0 ? opt_.max_pivots : 10 * size * size + 50;
  return true;
}

void Simplex::pivot(int r, int e) {
  const double p = at(r, e);
  double* pr = &t_[static_cast<std::size_t>(r) * width_];
  for (int j = 0; j < width_; ++j) pr[j] /= p;
  pr[e] = 1.0;
  for (int i = 0; i <= m_; ++i) {
    if (i == r) continue;
    double f = at(i, e);
    if (f == 0.0) continue;
    double* pi = &t_[static_cast<std::size_t>(i) * width_];
    for (int j = 0; j < width_; ++j) pi[j] -= f * pr[j];
    pi[e] = 0.0;
  }
  basis_[r] = e;
  ++pivots_;
}

bool Simplex::iterate(int allowed) {
  const double tol = opt_.pivot_tol;
  long count = 0;
  for (;;) {
    int e = -1;
    for (int j = 0; j < allowed; ++j) {
      if (at(m_, j) < -tol) {
        e = j;
        break;
      }
    }
    if (e < 0) return true;
    int r = -1;
    double best = 0.0;
    for (int i = 0; i < m_; ++i) {
      double a = at(i, e);
      if (a <= tol) continue;
      double ratio = rhs(i) / a;
      if (r < 0 || ratio < best - 1e-14 || (ratio <= best + 1e-14 && basis_[i] < basis_[r])) {
        r = i;
        best = ratio;
      }
    }
    if (r < 0) return false;
    pivot(r, e);
    if (++count > cap_) throw SimplexStallError();
  }
}

bool Simplex::phase_one() {
  if (nart_ == 0) return true;
  for (int j = 0; j < width_; ++j) at(m_, j) = 0.0;
  for (int i : art_row_)
    for (int j = 0; j < width_; ++j) at(m_, j) -= at(i, j);
  for (int c = nstruct_ + m_; c < ncols_; ++c) at(m_, c) = 0.0;
  iterate(ncols_);
  // rhs of the objective row holds -(sum of artificials)
  if (-rhs(m_) > opt_.feasibility_tol) return false;
  // drive zero-valued artificials out of the basis
  for (int i = 0; i < m_; ++i) {
    if (basis_[i] < nstruct_ + m_) continue;
    int e = -1;
    double best = opt_.pivot_tol;
    for (int j = 0; j < nstruct_ + m_; ++j) {
      if (std::abs(at(i, j)) > best) {
        best = std::abs(at(i, j));
        e = j;
      }
    }
    if (e >= 0) pivot(i, e);
  }
  return true;
}

LpStatus Simplex::phase_two(const Vector& c) {
  std::vector<double> cost(ncols_, 0.0);
  for (int k = 0; k < sys_.dim(); ++k) {
    switch (kind_[k]) {
      case VarKind::shifted_lower: cost[col_of_[k]] = -c[k]; break;
      case VarKind::shifted_upper: cost[col_of_[k]] = c[k]; break;
      case VarKind::split:
        cost[col_of_[k]] = -c[k];
        cost[col_of_[k] + 1] = c[k];
        break;
    }
  }
  for (int j = 0; j < width_; ++j) at(m_, j) = j < ncols_ ? cost[j] : 0.0;
  for (int i = 0; i < m_; ++i) {
    double cb = cost[basis_[i]];
    if (cb == 0.0) continue;
    for (int j = 0; j < width_; ++j) at(m_, j) -= cb * at(i, j);
  }
  return iterate(nstruct_ + m_) ? LpStatus::optimal : LpStatus::unbounded;
}

Vector Simplex::solution() const {
  std::vector<double> y(nstruct_, 0.0);
  for (int i = 0; i < m_; ++i)
    if (basis_[i] < nstruct_) y[basis_[i]] = std::max(0.0, rhs(i));
  const int d = sys_.dim();
  Vector x(d);
  for (int k = 0; k < d; ++k) {
    switch (kind_[k]) {
      case VarKind::shifted_lower: x[k] = sys_.lower[k] + y[col_of_[k]]; break;
      case VarKind::shifted_upper: x[k] = sys_.upper[k] - y[col_of_[k]]; break;
      case VarKind::split: x[k] = y[col_of_[k]] - y[col_of_[k] + 1]; break;
    }
    x[k] = std::min(std::max(x[k], sys_.lower[k]), sys_.upper[k]);
  }
  return x;
}

void check_dims(const LinearSystem& sys) {
  if (sys.b.size() != sys.A.rows() || sys.lower.size() != sys.A.cols() ||
      sys.upper.size() != sys.A.cols())
    throw Error("linear system dimensions are inconsistent");
}

}  // namespace

bool feasible(const LinearSystem& sys, const SimplexOptions& opt) {
  check_dims(sys);
  Simplex s(sys, opt);
  if (!s.setup()) return false;
  return s.phase_one();
}

LpResult find_feasible_point(const LinearSystem& sys, const SimplexOptions& opt) {
  check_dims(sys);
  LpResult res;
  Simplex s(sys, opt);
  if (!s.setup() || !s.phase_one()) {
    res.pivots = s.pivots();
    return res;
  }
  res.status = LpStatus::optimal;
  res.x = s.solution();
  res.pivots = s.pivots();
  return res;
}

LpResult maximize(const Vector& c, const LinearSystem& sys, const SimplexOptions& opt) {
  check_dims(sys);
  if (c.size() != sys.dim()) throw Error("objective dimension mismatch");
  LpResult res;
  Simplex s(sys, opt);
  if (!s.setup() || !s.phase_one()) {
    res.pivots = s.pivots();
    return res;
  }
  res.status = s.phase_two(c);
  res.pivots = s.pivots();
  if (res.status == LpStatus::optimal) {
    res.x = s.solution();
    res.value = c.dot(res.x);
  } else {
    res.value = kInf;
  }
  return res;
}

}  // namespace calproj
