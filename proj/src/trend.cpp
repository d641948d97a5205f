#include "floodattr/trend.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "floodattr/error.hpp"
#include "floodattr/extreme_value.hpp"

namespace floodattr {

TrendResult ols_log_trend(const AnnualMaxSeries& s, int start_year, int min_points) {
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.years[i] < start_year) continue;
    if (!(s.discharge[i] > 0.0)) {
      fail(ErrorCode::Domain,
           "log trend needs positive discharges, year " + std::to_string(s.years[i]));
    }
    x.push_back(static_cast<double>(s.years[i]));
    y.push_back(std::log(s.discharge[i]));
  }
  const auto n = x.size();
  if (n < static_cast<std::size_t>(std::max(min_points, 3))) {
    fail(ErrorCode::InvalidArgument, "log trend needs at least " + std::to_string(min_points) +
                                         " observations from " + std::to_string(start_year) +
                                         ", got " + std::to_string(n));
  }
  const double nd = static_cast<double>(n);
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= nd;
  my /= nd;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) fail(ErrorCode::InvalidArgument, "log trend needs at least two distinct years");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (intercept + slope * x[i]);
    rss += r * r;
  }
  const double se = std::sqrt(rss / (nd - 2.0) / sxx);
  const boost::math::students_t dist(nd - 2.0);
  const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
  TrendResult out;
  out.slope = 100.0 * slope;
  out.ci_lo = 100.0 * (slope - t * se);
  out.ci_hi = 100.0 * (slope + t * se);
  out.start_year = start_year;
  out.n = static_cast<int>(n);
  return out;
}

MkResult mann_kendall(std::span<const double> values, double alpha) {
  const auto n = values.size();
  if (n < 8) {
    fail(ErrorCode::InvalidArgument,
         "Mann-Kendall needs at least 8 observations, got " + std::to_string(n));
  }
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidArgument, "alpha must be in (0, 1)");
  MkResult r;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      r.s_statistic += (values[j] > values[i]) - (values[j] < values[i]);
    }
  }
  std::map<double, long> ties;
  for (double v : values) ++ties[v];
  const double nd = static_cast<double>(n);
  double var = nd * (nd - 1.0) * (2.0 * nd + 5.0);
  for (const auto& [value, t] : ties) {
    const double td = static_cast<double>(t);
    var -= td * (td - 1.0) * (2.0 * td + 5.0);
  }
  r.variance = var / 18.0;
  if (!(r.variance > 0.0)) {
    r.all_tied = true;
    r.variance = 0.0;
    return r;
  }
  const double s = static_cast<double>(r.s_statistic);
  if (r.s_statistic > 0) {
    r.z = (s - 1.0) / std::sqrt(r.variance);
  } else if (r.s_statistic < 0) {
    r.z = (s + 1.0) / std::sqrt(r.variance);
  }
  r.significant_upward = r.z > normal_quantile(1.0 - alpha / 2.0);
  return r;
}

MkResult mann_kendall(const AnnualMaxSeries& s, double alpha) {
  return mann_kendall(std::span<const double>(s.discharge), alpha);
}

SeasonalityResult seasonality(std::span<const FloodDate> dates) {
  if (dates.empty()) fail(ErrorCode::InvalidArgument, "seasonality needs at least one date");
  double sx = 0.0;
  double sy = 0.0;
  double len_sum = 0.0;
  for (const auto& d : dates) {
    const double len = std::chrono::year{d.year}.is_leap() ? 366.0 : 365.0;
    if (d.day_of_year < 1 || d.day_of_year > static_cast<int>(len)) {
      fail(ErrorCode::Validation, "day of year " + std::to_string(d.day_of_year) +
                                      " out of range for " + std::to_string(d.year));
    }
    const double theta = 2.0 * std::numbers::pi * d.day_of_year / len;
    sx += std::cos(theta);
    sy += std::sin(theta);
    len_sum += len;
  }
  const double n = static_cast<double>(dates.size());
  SeasonalityResult r;
  r.n = static_cast<int>(dates.size());
  const double mx = sx / n;
  const double my = sy / n;
  r.concentration = std::min(1.0, std::hypot(mx, my));
  double angle = std::atan2(my, mx);
  if (angle < 0.0) angle += 2.0 * std::numbers::pi;
  r.mean_angle = angle;
  const double mean_len = len_sum / n;
  r.mean_day = angle * mean_len / (2.0 * std::numbers::pi);
  if (r.mean_day >= mean_len) r.mean_day -= mean_len;
  return r;
}

}  // namespace floodattr
