#pragma once

// Reference implementations used only by the tests. Each one is written
// from the definition, without sharing code with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Root of a monotone increasing function by bisection.
inline double bisect(const std::function<double(double)>& f, double target, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double gumbel_logpdf(double z, double mu, double sigma) {
  const double u = (z - mu) / sigma;
  return -std::log(sigma) - u - std::exp(-u);
}

inline double normal_pdf(double x, double m, double s) {
  const double z = (x - m) / s;
  return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
}

// Degree-0 tricube smoother by explicit enumeration of candidate windows:
// every window of `span` consecutive indices containing i is scored by its
// largest distance to i, the smallest score wins and ties go to the lowest
// start.
inline std::vector<double> loess0(const std::vector<double>& v, int span) {
  const int n = static_cast<int>(v.size());
  std::vector<double> out(v.size());
  for (int i = 0; i < n; ++i) {
    int best_lo = -1;
    int best_reach = n + 1;
    for (int lo = 0; lo + span <= n; ++lo) {
      if (i < lo || i >= lo + span) continue;
      const int reach = std::max(i - lo, lo + span - 1 - i);
      if (reach < best_reach) {
        best_reach = reach;
        best_lo = lo;
      }
    }
    if (best_reach == 0) {
      out[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)];
      continue;
    }
    const double h = best_reach * (1.0 + 1e-9);
    double num = 0.0;
    double den = 0.0;
    for (int j = best_lo; j < best_lo + span; ++j) {
      const double u = std::abs(j - i) / h;
      const double w = std::pow(1.0 - u * u * u, 3);
      num += w * v[static_cast<std::size_t>(j)];
      den += w;
    }
    out[static_cast<std::size_t>(i)] = num / den;
  }
  return out;
}

// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
inline double ks_pvalue(std::vector<double> x, std::vector<double> y) {
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  const double en = std::sqrt(n * m / (n + m));
  const double lambda = (en + 0.12 + 0.11 / en) * d;
  if (lambda < 0.3) return 1.0;  // series converges too slowly here, p > 0.99
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace oracle
