#pragma once

// Classical change statistics reported next to the attribution: OLS trend
// of log flood peaks, the Mann-Kendall test and circular seasonality.

#include <span>

#include "floodattr/series.hpp"

namespace floodattr {

inline constexpr int kDefaultStartYear = 1961;

struct TrendResult {
  double slope = 0.0;  // %/year, 100 x slope of ln(discharge) on year
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int start_year = kDefaultStartYear;
  int n = 0;
};

[[nodiscard]] TrendResult ols_log_trend(const AnnualMaxSeries& s,
                                        int start_year = kDefaultStartYear, int min_points = 10);

struct MkResult {
  long s_statistic = 0;
  double variance = 0.0;
  double z = 0.0;
  bool significant_upward = false;
  bool all_tied = false;  // zero variance; never significant
};

[[nodiscard]] MkResult mann_kendall(std::span<const double> values, double alpha = 0.05);
[[nodiscard]] MkResult mann_kendall(const AnnualMaxSeries& s, double alpha = 0.05);

struct FloodDate {
  int year = 0;
  int day_of_year = 1;  // 1-based
};

struct SeasonalityResult {
  double mean_day = 0.0;    // day of year, in [0, year length)
  double mean_angle = 0.0;  // radians, in [0, 2 pi)
  double concentration = 0.0;
  int n = 0;
};

// Each date maps to the angle 2 pi day / (length of its year).
[[nodiscard]] SeasonalityResult seasonality(std::span<const FloodDate> dates);

}  // namespace floodattr
