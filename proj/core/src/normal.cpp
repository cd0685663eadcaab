#include "calproj/normal.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <array>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace calproj::normal {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kInfinity = std::numeric_limits<double>::infinity();
const double kLogSqrtTwoPi = 0.5 * std::log(kTwoPi);

// Nodes in (-1, 0) and matching weights of the n-point Gauss-Legendre rule.
struct HalfRule {
  std::vector<double> x, w;
};

HalfRule gauss_legendre_half(int n) {
  HalfRule rule;
  for (int i = 1; i <= n / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i - 0.25) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // recompute the derivative at the converged node
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    rule.x.push_back(-z);
    rule.w.push_back(2.0 / ((1.0 - z * z) * dp * dp));
  }
  return rule;
}

const std::array<HalfRule, 3>& rules() {
  static const std::array<HalfRule, 3> r = {gauss_legendre_half(6), gauss_legendre_half(12),
                                            gauss_legendre_half(20)};
  return r;
}

// P(X > dh, Y > dk), Drezner-Wesolowsky with Genz's refinements.
double bvnu(double dh, double dk, double r) {
  const HalfRule& rule = std::abs(r) < 0.3 ? rules()[0] : std::abs(r) < 0.75 ? rules()[1] : rules()[2];
  const std::size_t lg = rule.x.size();
  double h = dh, k = dk;
  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    double hs = (h * h + k * k) / 2.0;
    double asr = std::asin(r);
    for (std::size_t i = 0; i < lg; ++i) {
      double sn = std::sin(asr * (rule.x[i] + 1.0) / 2.0);
      bvn += rule.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      sn = std::sin(asr * (-rule.x[i] + 1.0) / 2.0);
      bvn += rule.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    return bvn * asr / (2.0 * kTwoPi) + cdf(-h) * cdf(-k);
  }
  if (r < 0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(r) < 1.0) {
    double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    double bs = (h - k) * (h - k);
    double c = (4.0 - hk) / 8.0;
    double d = (12.0 - hk) / 16.0;
    bvn = a * std::exp(-(bs / as + hk) / 2.0) *
          (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (hk > -160.0) {
      double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * std::sqrt(kTwoPi) * cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (std::size_t i = 0; i < lg; ++i) {
      double xs = std::pow(a * (rule.x[i] + 1.0), 2);
      double rs = std::sqrt(1.0 - xs);
      bvn += a * rule.w[i] *
             (std::exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs -
              std::exp(-(bs / xs + hk) / 2.0) * (1.0 + c * xs * (1.0 + d * xs)));
      xs = as * std::pow(-rule.x[i] + 1.0, 2) / 4.0;
      rs = std::sqrt(1.0 - xs);
      bvn += a * rule.w[i] * std::exp(-(bs / xs + hk) / 2.0) *
             (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs - (1.0 + c * xs * (1.0 + d * xs)));
    }
    bvn = -bvn / kTwoPi;
  }
  if (r > 0) return bvn + cdf(-std::max(h, k));
  return -bvn + std::max(0.0, cdf(-h) - cdf(-k));
}

}  // namespace

double pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrtTwoPi); }

double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double quantile(double p) {
  if (p <= 0.0) return -kInfinity;
  if (p >= 1.0) return kInfinity;
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double log_cdf(double x) {
  if (x > 0.0) return std::log1p(-cdf(-x));
  if (x > -30.0) return std::log(cdf(x));
  // asymptotic expansion of the Mills ratio
  double x2 = 1.0 / (x * x);
  double series = 1.0 - x2 * (1.0 - 3.0 * x2 * (1.0 - 5.0 * x2 * (1.0 - 7.0 * x2)));
  return -0.5 * x * x - std::log(-x) - kLogSqrtTwoPi + std::log(series);
}

double mills_ratio(double x) {
  if (x > -30.0) return pdf(x) / cdf(x);
  return std::exp(-0.5 * x * x - kLogSqrtTwoPi - log_cdf(x));
}

double bvn_cdf(double x, double y, double r) {
  if (std::isnan(x) || std::isnan(y) || std::isnan(r)) return std::nan("");
  if (x == -kInfinity || y == -kInfinity) return 0.0;
  if (x == kInfinity) return cdf(y);
  if (y == kInfinity) return cdf(x);
  double v = bvnu(-x, -y, r);
  return std::min(1.0, std::max(0.0, v));
}

double bvn_pdf(double x, double y, double r) {
  double om = 1.0 - r * r;
  return std::exp(-(x * x - 2.0 * r * x * y + y * y) / (2.0 * om)) / (kTwoPi * std::sqrt(om));
}

}  // namespace calproj::normal
