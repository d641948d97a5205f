#include "floodattr/covariates.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numeric>

#include "floodattr/error.hpp"

namespace floodattr {

namespace {

using std::chrono::day;
using std::chrono::days;
using std::chrono::month;
using std::chrono::sys_days;
using std::chrono::year;
using std::chrono::year_month_day;

int days_in_year(int y) { return year{y}.is_leap() ? 366 : 365; }

std::string format_date(const year_month_day& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

struct YearBlock {
  int year;
  std::size_t offset;
  std::size_t length;
};

// Splits a daily series into calendar years, rejecting partial years and
// invalid values.
std::vector<YearBlock> year_blocks(const DailySeries& d) {
  if (!d.start_date.ok()) fail(ErrorCode::Validation, "daily series has an invalid start date");
  if (d.start_date.month() != month{1} || d.start_date.day() != day{1}) {
    fail(ErrorCode::Validation,
         "daily series must start on January 1, starts on " + format_date(d.start_date));
  }
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    if (!std::isfinite(d.values[i]) || d.values[i] < 0.0) {
      fail(ErrorCode::Validation, "daily precipitation must be finite and >= 0 on " +
                                      format_date(d.date_at(i)));
    }
  }
  std::vector<YearBlock> blocks;
  int y = static_cast<int>(d.start_date.year());
  std::size_t offset = 0;
  while (offset < d.values.size()) {
    const auto len = static_cast<std::size_t>(days_in_year(y));
    if (offset + len > d.values.size()) {
      fail(ErrorCode::Validation, "daily series ends with a partial year " + std::to_string(y) +
                                      " (" + std::to_string(d.values.size() - offset) + " days)");
    }
    blocks.push_back({y, offset, len});
    offset += len;
    ++y;
  }
  if (blocks.empty()) fail(ErrorCode::Validation, "daily series is empty");
  return blocks;
}

}  // namespace

std::string_view to_string(CovariateKind kind) noexcept {
  switch (kind) {
    case CovariateKind::AnnualTotalP:
      return "AnnualTotalP";
    case CovariateKind::MaxP30:
      return "MaxP30";
    case CovariateKind::MaxP7:
      return "MaxP7";
    case CovariateKind::MaxP1:
      return "MaxP1";
    case CovariateKind::LandUseIntensity:
      return "LandUseIntensity";
    case CovariateKind::ReservoirIndex:
      return "ReservoirIndex";
  }
  return "?";
}

std::optional<CovariateKind> parse_covariate_kind(std::string_view name) noexcept {
  for (auto k : kAllCovariateKinds) {
    if (to_string(k) == name) return k;
  }
  if (name == "LI") return CovariateKind::LandUseIntensity;
  if (name == "RI") return CovariateKind::ReservoirIndex;
  return std::nullopt;
}

bool is_precipitation(CovariateKind kind) noexcept {
  return kind != CovariateKind::LandUseIntensity && kind != CovariateKind::ReservoirIndex;
}

std::optional<int> precipitation_duration(CovariateKind kind) noexcept {
  switch (kind) {
    case CovariateKind::MaxP1:
      return 1;
    case CovariateKind::MaxP7:
      return 7;
    case CovariateKind::MaxP30:
      return 30;
    default:
      return std::nullopt;
  }
}

std::optional<double> CovariateSeries::at_year(int year) const noexcept {
  const auto it = std::lower_bound(years.begin(), years.end(), year);
  if (it == years.end() || *it != year) return std::nullopt;
  return values[static_cast<std::size_t>(it - years.begin())];
}

year_month_day DailySeries::date_at(std::size_t index) const {
  return year_month_day{sys_days{start_date} + days{static_cast<long>(index)}};
}

CovariateSeries annual_max_precip(const DailySeries& d, int duration,
                                  std::span<const int> allowed) {
  if (std::find(allowed.begin(), allowed.end(), duration) == allowed.end()) {
    fail(ErrorCode::Config, "unsupported precipitation duration " + std::to_string(duration) +
                                " days");
  }
  CovariateSeries out;
  switch (duration) {
    case 1:
      out.kind = CovariateKind::MaxP1;
      break;
    case 7:
      out.kind = CovariateKind::MaxP7;
      break;
    case 30:
      out.kind = CovariateKind::MaxP30;
      break;
    default:
      out.kind = CovariateKind::MaxP1;  // non-standard durations keep the extreme kind
  }
  const auto width = static_cast<std::size_t>(duration);
  for (const auto& blk : year_blocks(d)) {
    if (width > blk.length) {
      fail(ErrorCode::Config, "duration longer than a year: " + std::to_string(duration));
    }
    const auto first = d.values.begin() + static_cast<long>(blk.offset);
    double window = std::accumulate(first, first + static_cast<long>(width), 0.0);
    double best = window;
    // Rolling sum; recomputed from scratch periodically to keep rounding
    // drift out of long series.
    for (std::size_t s = 1; s + width <= blk.length; ++s) {
      if (s % 64 == 0) {
        window = std::accumulate(first + static_cast<long>(s),
                                 first + static_cast<long>(s + width), 0.0);
      } else {
        window += first[static_cast<long>(s + width - 1)] - first[static_cast<long>(s - 1)];
      }
      best = std::max(best, window);
    }
    out.years.push_back(blk.year);
    out.values.push_back(best);
  }
  return out;
}

CovariateSeries annual_total_precip(const DailySeries& d) {
  CovariateSeries out;
  out.kind = CovariateKind::AnnualTotalP;
  for (const auto& blk : year_blocks(d)) {
    const auto first = d.values.begin() + static_cast<long>(blk.offset);
    out.years.push_back(blk.year);
    out.values.push_back(std::accumulate(first, first + static_cast<long>(blk.length), 0.0));
  }
  return out;
}

CovariateSeries loess_smooth(const CovariateSeries& s, int span_points) {
  if (span_points < 1) fail(ErrorCode::InvalidArgument, "LOESS span must be >= 1");
  const auto n = s.values.size();
  const auto span = static_cast<std::size_t>(span_points);
  if (n < span) {
    fail(ErrorCode::InvalidArgument, "LOESS needs at least " + std::to_string(span_points) +
                                         " points, series has " + std::to_string(n));
  }
  CovariateSeries out = s;
  for (std::size_t i = 0; i < n; ++i) {
    // Nearest `span` indices form a contiguous window; the lower index wins
    // a distance tie.
    const std::size_t half = span / 2;
    std::size_t lo = i >= half ? i - half : 0;
    lo = std::min(lo, n - span);
    const std::size_t hi = lo + span - 1;
    const double max_dist = static_cast<double>(std::max(i - lo, hi - i));
    if (max_dist == 0.0) {
      out.values[i] = s.values[i];
      continue;
    }
    const double h = max_dist * (1.0 + 1e-9);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
      const double u = std::abs(static_cast<double>(j) - static_cast<double>(i)) / h;
      const double t = 1.0 - u * u * u;
      const double w = t * t * t;
      num += w * s.values[j];
      den += w;
    }
    out.values[i] = num / den;
  }
  return out;
}

double land_use_intensity(std::span<const CropCell> cells, double total_area, double y_ref,
                          int year, int base_year) {
  if (!(total_area > 0.0)) fail(ErrorCode::InvalidArgument, "total catchment area must be > 0");
  if (!(y_ref > 0.0)) fail(ErrorCode::InvalidArgument, "reference yield must be > 0");
  double li = 0.0;
  for (const auto& c : cells) {
    if (!(c.crop_area >= 0.0) || !(c.yield_2000 >= 0.0)) {
      fail(ErrorCode::Validation, "crop cell requires crop_area >= 0 and yield_2000 >= 0");
    }
    double y = c.yield_2000 + c.yield_trend * static_cast<double>(year - base_year);
    if (y < 0.0) {
      spdlog::warn("extrapolated yield {:.4f} t/ha in {} clamped to 0", y, year);
      y = 0.0;
    }
    li += (c.crop_area / total_area) * (y / y_ref);
  }
  return li;
}

CovariateSeries land_use_intensity_series(std::span<const CropCell> cells, double total_area,
                                          double y_ref, std::span<const int> years,
                                          int base_year) {
  CovariateSeries out;
  out.kind = CovariateKind::LandUseIntensity;
  out.years.assign(years.begin(), years.end());
  for (int y : years) out.values.push_back(land_use_intensity(cells, total_area, y_ref, y, base_year));
  return out;
}

double reservoir_index(std::span<const ReservoirRecord> reservoirs, int year,
                       double catchment_area, double mean_annual_flow_volume) {
  if (!(catchment_area > 0.0)) fail(ErrorCode::InvalidArgument, "catchment area must be > 0");
  if (!(mean_annual_flow_volume > 0.0)) {
    fail(ErrorCode::InvalidArgument, "mean annual flow volume must be > 0");
  }
  double ri = 0.0;
  for (const auto& r : reservoirs) {
    if (!(r.capacity > 0.0) || !(r.drainage_area > 0.0)) {
      fail(ErrorCode::Validation, "reservoir requires capacity > 0 and drainage area > 0");
    }
    if (r.drainage_area > catchment_area) {
      fail(ErrorCode::Validation, "reservoir drainage area " + std::to_string(r.drainage_area) +
                                      " km2 exceeds the catchment area " +
                                      std::to_string(catchment_area) + " km2");
    }
    if (r.year_built <= year) {
      ri += (r.drainage_area / catchment_area) * (r.capacity / mean_annual_flow_volume);
    }
  }
  return ri;
}

CovariateSeries reservoir_index_series(std::span<const ReservoirRecord> reservoirs,
                                       std::span<const int> years, double catchment_area,
                                       double mean_annual_flow_volume) {
  CovariateSeries out;
  out.kind = CovariateKind::ReservoirIndex;
  out.years.assign(years.begin(), years.end());
  for (int y : years) {
    out.values.push_back(reservoir_index(reservoirs, y, catchment_area, mean_annual_flow_volume));
  }
  return out;
}

}  // namespace floodattr
