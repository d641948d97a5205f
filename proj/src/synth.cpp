#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <fmt/format.h>

#include <cmath>
#include <numbers>
#include <random>

#include "floodattr/error.hpp"
#include "floodattr/pipeline.hpp"

namespace floodattr {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent streams for precipitation, annual maxima and flood dates, so
// changing one part of a spec does not reshuffle the others.
enum class Stream : std::uint64_t { Precipitation = 1, AnnualMax = 2, Dates = 3 };

std::mt19937_64 stream(std::uint64_t seed, Stream s) {
  return std::mt19937_64(splitmix64(seed * 4 + static_cast<std::uint64_t>(s)));
}

double uniform(std::mt19937_64& g) { return boost::random::uniform_01<double>()(g); }
double normal(std::mt19937_64& g) { return boost::random::normal_distribution<double>()(g); }

constexpr int kLoessSpan = 10;

void check(const SyntheticSpec& s) {
  const auto bad = [](const std::string& what) { fail(ErrorCode::InvalidArgument, "synthetic site: " + what); };
  if (s.site_id.empty()) bad("site_id is empty");
  if (s.n_years < kLoessSpan) bad(fmt::format("needs at least {} years", kLoessSpan));
  if (!(s.sigma > 0.0) || !std::isfinite(s.a) || !std::isfinite(s.b)) bad("invalid a, b or sigma");
  if (!is_precipitation(s.precip_kind)) bad("precip_kind must be a precipitation covariate");
  if (!(s.precip_level > 0.0)) bad("precip_level must be > 0");
  if (!(s.precip_period > 0.0)) bad("precip_period must be > 0");
  if (!(s.catchment_area > 0.0) || !(s.mean_annual_flow_volume > 0.0)) {
    bad("catchment area and mean annual flow volume must be > 0");
  }
  if (s.crop_share < 0.0 || s.crop_share > 1.0) bad("crop_share must be in [0, 1]");
  if (s.yield_2000 < 0.0) bad("yield_2000 must be >= 0");
}

int days_in(int year) { return std::chrono::year{year}.is_leap() ? 366 : 365; }

}  // namespace

std::string_view to_string(TrueModel m) noexcept {
  switch (m) {
    case TrueModel::TimeInvariant:
      return "G0";
    case TrueModel::Atmospheric:
      return "Atmospheric";
    case TrueModel::Catchment:
      return "Catchment";
    case TrueModel::RiverSystem:
      return "RiverSystem";
  }
  return "?";
}

std::optional<TrueModel> parse_true_model(std::string_view s) noexcept {
  for (auto m : {TrueModel::TimeInvariant, TrueModel::Atmospheric, TrueModel::Catchment,
                 TrueModel::RiverSystem}) {
    if (to_string(m) == s) return m;
  }
  if (s == "TimeInvariant") return TrueModel::TimeInvariant;
  return std::nullopt;
}

std::vector<double> synthetic_precip_target(const SyntheticSpec& spec) {
  check(spec);
  const auto n = static_cast<std::size_t>(spec.n_years);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    const double wave = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / spec.precip_period +
                                 spec.precip_phase);
    out[i] = spec.precip_level * (1.0 + spec.precip_trend * t) +
             spec.precip_level * spec.precip_amplitude * wave;
    if (!(out[i] > 0.0)) {
      fail(ErrorCode::Domain,
           fmt::format("synthetic covariate shape is infeasible: non-positive precipitation "
                       "required in {}",
                       spec.start_year + static_cast<int>(i)));
    }
  }
  return out;
}

SiteRecord generate_synthetic_site(const SyntheticSpec& spec) {
  const auto target = synthetic_precip_target(spec);
  const auto n = target.size();
  std::vector<int> years(n);
  for (std::size_t i = 0; i < n; ++i) years[i] = spec.start_year + static_cast<int>(i);

  // Daily series: one storm block of `d` equal days carrying the annual
  // value, background days below half the storm intensity.
  auto prng = stream(spec.seed, Stream::Precipitation);
  const auto duration = precipitation_duration(spec.precip_kind);
  DailySeries daily;
  daily.start_date = std::chrono::year{spec.start_year} / std::chrono::January / 1;
  for (std::size_t i = 0; i < n; ++i) {
    const int len = days_in(years[i]);
    const double r = target[i];
    std::vector<double> v(static_cast<std::size_t>(len), 0.0);
    if (duration) {
      const int d = *duration;
      const double intensity = r / d;
      for (auto& x : v) {
        if (uniform(prng) < 0.3) x = 0.5 * intensity * uniform(prng);
      }
      const int first = 90 + static_cast<int>(uniform(prng) * (160 - d));
      for (int k = 0; k < d; ++k) v[static_cast<std::size_t>(first + k)] = intensity;
    } else {
      double total = 0.0;
      for (auto& x : v) {
        x = uniform(prng) < 0.6 ? -std::log(1.0 - uniform(prng)) : 0.0;
        total += x;
      }
      if (total == 0.0) {
        v.assign(v.size(), 1.0);
        total = static_cast<double>(len);
      }
      for (auto& x : v) x *= r / total;
    }
    daily.values.insert(daily.values.end(), v.begin(), v.end());
  }

  const auto rebuilt_raw = duration ? annual_max_precip(daily, *duration) : annual_total_precip(daily);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(rebuilt_raw.values[i] - target[i]) > 1e-9 * target[i]) {
      fail(ErrorCode::Domain,
           fmt::format("daily precipitation does not reproduce the annual value in {}", years[i]));
    }
  }
  // The driver covariate is the smoothed series, as the pipeline builds it.
  const auto precip = loess_smooth(rebuilt_raw, kLoessSpan);

  SiteRecord site;
  site.site_id = spec.site_id;
  site.catchment_area = spec.catchment_area;
  site.outlet_elevation = spec.outlet_elevation;
  site.mean_annual_flow_volume = spec.mean_annual_flow_volume;
  site.precipitation = std::move(daily);
  if (spec.crop_share > 0.0) {
    site.crops.push_back({spec.crop_share * spec.catchment_area, spec.yield_2000, spec.yield_trend});
  }
  site.reservoirs = spec.reservoirs;
  const auto li = land_use_intensity_series(site.crops, spec.catchment_area, kDefaultReferenceYield,
                                            years);
  const auto ri = reservoir_index_series(site.reservoirs, years, spec.catchment_area,
                                         spec.mean_annual_flow_volume);

  auto arng = stream(spec.seed, Stream::AnnualMax);
  site.am.years = years;
  site.am.discharge.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double log_mu = spec.a;
    switch (spec.model) {
      case TrueModel::TimeInvariant:
        break;
      case TrueModel::Atmospheric:
        log_mu += spec.b * std::log(precip.values[i]);
        break;
      case TrueModel::Catchment:
        log_mu += spec.b * li.values[i];
        break;
      case TrueModel::RiverSystem:
        log_mu += spec.b * ri.values[i];
        break;
    }
    const double mu = std::exp(log_mu);
    double z = 0.0;
    for (int attempt = 0;; ++attempt) {
      if (attempt == 1000) {
        fail(ErrorCode::Domain, "synthetic discharge stays non-positive; scale is too large");
      }
      double u = uniform(arng);
      while (u <= 0.0) u = uniform(arng);
      z = mu - spec.sigma * std::log(-std::log(u));
      if (z > 0.0) break;
    }
    site.am.discharge[i] = z;
  }

  if (spec.flood_dates) {
    auto drng = stream(spec.seed, Stream::Dates);
    for (int y : years) {
      const int len = days_in(y);
      const int day = static_cast<int>(std::lround(190.0 + 30.0 * normal(drng)));
      site.flood_dates.push_back({y, std::clamp(day, 1, len)});
    }
  }
  return site;
}

std::vector<SyntheticSpec> synthetic_suite(const SyntheticSuite& suite) {
  if (suite.sites < 1 || suite.sites > 999) {
    fail(ErrorCode::InvalidArgument, "synthetic suite needs 1 to 999 sites");
  }
  if (!(suite.mu0 > 0.0)) fail(ErrorCode::InvalidArgument, "mu0 must be > 0");
  std::vector<SyntheticSpec> out;
  for (int i = 0; i < suite.sites; ++i) {
    SyntheticSpec s;
    s.site_id = fmt::format("SYN{:03d}", i + 1);
    s.model = suite.model;
    s.b = suite.b;
    s.sigma = suite.sigma;
    s.start_year = suite.start_year;
    s.n_years = suite.n_years;
    s.seed = splitmix64(suite.seed + 0x9e37ULL * static_cast<std::uint64_t>(i + 1));
    s.precip_trend = suite.precip_trend;
    s.precip_phase = 0.7 * i;
    s.catchment_area = 80.0 * std::pow(2.0, i % 7);
    s.mean_annual_flow_volume = 0.6 * s.catchment_area;
    s.outlet_elevation = 250.0 + 60.0 * (i % 5);
    double center = 0.0;  // covariate value where mu equals mu0
    switch (suite.model) {
      case TrueModel::TimeInvariant:
        s.b = 0.0;
        break;
      case TrueModel::Atmospheric:
        center = std::log(s.precip_level * (1.0 + 0.5 * suite.precip_trend));
        break;
      case TrueModel::Catchment:
        // Half the catchment under crops whose yields keep rising.
        s.crop_share = 0.5;
        s.yield_trend = 0.08;
        center = 0.5 * s.yield_2000 / kDefaultReferenceYield;
        break;
      case TrueModel::RiverSystem:
        s.reservoirs.push_back({s.start_year + s.n_years / 2, 0.5 * s.mean_annual_flow_volume,
                                0.6 * s.catchment_area});
        center = 0.15;
        break;
    }
    s.a = std::log(suite.mu0) - s.b * center;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace floodattr
