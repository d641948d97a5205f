#pragma once

// Builders for the year-indexed driver covariates: precipitation aggregates
// with decadal LOESS smoothing, the land-use intensity index and the
// reservoir index.

#include <array>
#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace floodattr {

enum class CovariateKind {
  AnnualTotalP,
  MaxP30,
  MaxP7,
  MaxP1,
  LandUseIntensity,
  ReservoirIndex,
};

inline constexpr std::array<CovariateKind, 6> kAllCovariateKinds = {
    CovariateKind::AnnualTotalP, CovariateKind::MaxP30,           CovariateKind::MaxP7,
    CovariateKind::MaxP1,        CovariateKind::LandUseIntensity, CovariateKind::ReservoirIndex};

[[nodiscard]] std::string_view to_string(CovariateKind kind) noexcept;
[[nodiscard]] std::optional<CovariateKind> parse_covariate_kind(std::string_view name) noexcept;
[[nodiscard]] bool is_precipitation(CovariateKind kind) noexcept;
// Window length in days for the annual-maximum kinds; nullopt otherwise.
[[nodiscard]] std::optional<int> precipitation_duration(CovariateKind kind) noexcept;

struct CovariateSeries {
  std::vector<int> years;
  std::vector<double> values;
  CovariateKind kind = CovariateKind::AnnualTotalP;

  [[nodiscard]] std::size_t size() const noexcept { return years.size(); }
  // Value for a year, or nullopt when the year is not covered.
  [[nodiscard]] std::optional<double> at_year(int year) const noexcept;
};

// Contiguous catchment-averaged daily totals (mm/day). Gaps must be
// rejected before a DailySeries is built.
struct DailySeries {
  std::chrono::year_month_day start_date;
  std::vector<double> values;

  [[nodiscard]] std::chrono::year_month_day date_at(std::size_t index) const;
};

inline constexpr std::array<int, 3> kDefaultDurations = {1, 7, 30};

// Per-year maximum of the sum over `duration` consecutive days inside the
// calendar year. Only whole calendar years are accepted.
[[nodiscard]] CovariateSeries annual_max_precip(const DailySeries& d, int duration,
                                                std::span<const int> allowed = kDefaultDurations);
[[nodiscard]] CovariateSeries annual_total_precip(const DailySeries& d);

// Degree-0 LOESS with tricube weights over the `span_points` nearest indices.
// Output keeps the input years.
[[nodiscard]] CovariateSeries loess_smooth(const CovariateSeries& s, int span_points = 10);

struct CropCell {
  double crop_area = 0.0;    // km2
  double yield_2000 = 0.0;   // t/ha
  double yield_trend = 0.0;  // t/ha per year
};

inline constexpr double kDefaultReferenceYield = 8.72;  // t/ha

[[nodiscard]] double land_use_intensity(std::span<const CropCell> cells, double total_area,
                                        double y_ref, int year, int base_year = 2000);
[[nodiscard]] CovariateSeries land_use_intensity_series(std::span<const CropCell> cells,
                                                        double total_area, double y_ref,
                                                        std::span<const int> years,
                                                        int base_year = 2000);

struct ReservoirRecord {
  int year_built = 0;
  double capacity = 0.0;       // 1e6 m3
  double drainage_area = 0.0;  // km2
};

inline constexpr double kHighAlterationThreshold = 0.25;

[[nodiscard]] double reservoir_index(std::span<const ReservoirRecord> reservoirs, int year,
                                     double catchment_area, double mean_annual_flow_volume);
[[nodiscard]] CovariateSeries reservoir_index_series(std::span<const ReservoirRecord> reservoirs,
                                                     std::span<const int> years,
                                                     double catchment_area,
                                                     double mean_annual_flow_volume);

}  // namespace floodattr
