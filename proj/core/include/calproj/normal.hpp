#pragma once

namespace calproj::normal {

double pdf(double x);
double cdf(double x);
// Inverse of cdf; returns -inf / +inf at 0 / 1.
double quantile(double p);
// log cdf(x), accurate far into the lower tail.
double log_cdf(double x);
// pdf(x) / cdf(x), the derivative of log_cdf.
double mills_ratio(double x);

// P(X <= x, Y <= y) for a standard bivariate normal with correlation r.
double bvn_cdf(double x, double y, double r);
// Joint density of the same distribution.
double bvn_pdf(double x, double y, double r);

}  // namespace calproj::normal
