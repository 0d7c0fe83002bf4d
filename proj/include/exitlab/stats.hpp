#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace exitlab::stats {

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double stddev(const std::vector<double>& v) {
  return std::sqrt(variance(v));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Wilson score interval for a binomial proportion (z = 1.96 -> 95%).
inline Interval wilson_ci(std::size_t successes, std::size_t n,
                          double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  const double p = static_cast<double>(successes) / static_cast<double>(n);
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// One-sample Kolmogorov-Smirnov statistic against a CDF; sorts a copy.
inline double ks_statistic(std::vector<double> sample,
                           const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double c = cdf(sample[i]);
    d = std::max(d, std::fabs(c - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - c));
  }
  return d;
}

// Asymptotic KS critical value at the given level (0.01 -> c = 1.628).
inline double ks_critical(double level, std::size_t n) {
  const double c = std::sqrt(-0.5 * std::log(level / 2.0));
  return c / std::sqrt(static_cast<double>(n));
}

// Least-squares slope of y on x.
inline double regression_slope(const std::vector<double>& x,
                               const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - mx) * (y[i] - my);
    den += (x[i] - mx) * (x[i] - mx);
  }
  return num / den;
}

// Adaptive Simpson quadrature with absolute/relative tolerance.
namespace detail {
inline double simpson(const std::function<double(double)>& f, double a,
                      double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}
inline double adapt(const std::function<double(double)>& f, double a,
                    double fa, double b, double fb, double fm, double whole,
                    double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, fa, m, fm, flm);
  const double right = simpson(f, m, fm, b, fb, frm);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adapt(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1) +
         adapt(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

inline double adaptive_simpson(const std::function<double(double)>& f,
                               double a, double b, double tol,
                               int max_depth = 40) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = detail::simpson(f, a, fa, b, fb, fm);
  return detail::adapt(f, a, fa, b, fb, fm, whole, tol, max_depth);
}

}  // namespace exitlab::stats
