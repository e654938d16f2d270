#pragma once

// Shared aliases and small numeric helpers used across the library.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace entbridge {

// Pointwise fields over the grid nodes.
using Field = Eigen::ArrayXd;

inline constexpr double kLogFloor = 1e-300;  // positivity floor before logs
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline Field linspace(double a, double b, int n) {
  if (n < 2) throw std::invalid_argument("linspace: need at least 2 points");
  Field x(n);
  const double h = (b - a) / (n - 1);
  for (int i = 0; i < n; ++i) x[i] = a + i * h;
  x[n - 1] = b;
  return x;
}

// log(sum exp(a_i)), tolerant of -inf entries; returns -inf for an empty sum.
inline double log_sum_exp(const Field& a) {
  double m = kNegInf;
  for (int i = 0; i < a.size(); ++i) m = std::max(m, a[i]);
  if (!std::isfinite(m)) return kNegInf;
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i)
    if (std::isfinite(a[i])) s += std::exp(a[i] - m);
  return m + std::log(s);
}

// Integrate samples y over the increasing abscissae t.  Uses composite
// Simpson when the grid is uniform with an odd node count, trapezoid
// otherwise.
inline double integrate(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = t.size();
  if (n != y.size()) throw std::invalid_argument("integrate: size mismatch");
  if (n < 2) return 0.0;
  bool uniform = true;
  const double h0 = t[1] - t[0];
  for (std::size_t k = 1; k + 1 < n; ++k)
    if (std::abs((t[k + 1] - t[k]) - h0) > 1e-12 * std::max(1.0, std::abs(h0))) {
      uniform = false;
      break;
    }
  if (uniform && n >= 3 && n % 2 == 1) {
    double s = y[0] + y[n - 1];
    for (std::size_t k = 1; k + 1 < n; ++k) s += y[k] * (k % 2 == 1 ? 4.0 : 2.0);
    return s * h0 / 3.0;
  }
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) s += 0.5 * (y[k] + y[k + 1]) * (t[k + 1] - t[k]);
  return s;
}

// Least-squares slope of y against x (used for empirical convergence orders).
inline double lsq_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw std::invalid_argument("lsq_slope: need >= 2 points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
  mx /= n; my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

}  // namespace entbridge
