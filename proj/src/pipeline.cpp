#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <thread>

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

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed of one model fit. Depends on the site and the model name only, so
// results do not depend on processing order or on the prior mode for G0.
std::uint64_t fit_seed(std::uint64_t master, std::string_view site, std::string_view model) {
  return splitmix64(master ^ fnv1a(site) ^ splitmix64(fnv1a(model)));
}

constexpr std::string_view kG0 = "G0";

double quantile_sorted(const std::vector<double>& v, double p) {
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> pooled(const PosteriorDraws& d, std::size_t param) {
  std::vector<double> out;
  out.reserve(d.total_draws());
  for (std::size_t c = 0; c < d.num_chains(); ++c) {
    const auto v = d.parameter(c, param);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

// Gaussian kernel density on a regular grid, Silverman bandwidth.
std::vector<std::pair<double, double>> kernel_density(const std::vector<double>& x, int points) {
  const auto s = summarize(x);
  auto sorted = x;
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = s.sd;
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
  const double n = static_cast<double>(x.size());
  const double h = 0.9 * spread * std::pow(n, -0.2);
  if (!(h > 0.0)) return {};
  const double lo = sorted.front() - 3.0 * h;
  const double hi = sorted.back() + 3.0 * h;
  const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
  std::vector<std::pair<double, double>> grid;
  grid.reserve(static_cast<std::size_t>(points));
  for (int g = 0; g < points; ++g) {
    const double at = lo + (hi - lo) * g / (points - 1);
    // Only draws within 8 bandwidths contribute at double precision.
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), at - 8.0 * h);
    const auto last = std::upper_bound(first, sorted.end(), at + 8.0 * h);
    double sum = 0.0;
    for (auto it = first; it != last; ++it) {
      const double u = (at - *it) / h;
      sum += std::exp(-0.5 * u * u);
    }
    grid.emplace_back(at, sum * norm);
  }
  return grid;
}

DiagnosticsSummary summarize_diagnostics(const Diagnostics& d) {
  DiagnosticsSummary s;
  s.converged = d.converged;
  s.divergences = d.divergences;
  s.stuck_chain = d.stuck_chain;
  s.min_ess = std::numeric_limits<double>::infinity();
  for (const auto& p : d.params) {
    if (p.indeterminate) s.indeterminate = true;
    if (p.rhat) s.max_rhat = std::max(s.max_rhat.value_or(*p.rhat), *p.rhat);
    s.min_ess = std::min({s.min_ess, p.ess_bulk, p.ess_tail});
  }
  if (d.params.empty()) s.min_ess = 0.0;
  return s;
}

ModelFit fit_model(const FitProblem& prob, const RunConfig& cfg, std::string_view site,
                   std::string model, std::optional<CovariateKind> covariate) {
  SamplerConfig sc = cfg.sampler;
  sc.seed = fit_seed(cfg.seed, site, model);
  const auto draws = sample(prob, sc);
  ModelFit f;
  f.model = std::move(model);
  f.covariate = covariate;
  f.prior_mode = cfg.prior_mode;
  f.waic = waic(draws, prob);
  f.diagnostics = summarize_diagnostics(diagnose(draws));
  f.a = summarize(pooled(draws, 0));
  auto log_sigma = pooled(draws, 2);
  for (auto& v : log_sigma) v = std::exp(v);
  f.sigma = summarize(std::move(log_sigma));
  if (prob.has_slope()) {
    auto b = pooled(draws, 1);
    f.b = summarize(b);
    f.b_density = kernel_density(b, cfg.density_grid_points);
  }
  return f;
}

bool is_constant(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

std::string year_range(const std::vector<int>& years) {
  if (years.empty()) return "none";
  if (years.size() == 1) return std::to_string(years.front());
  return fmt::format("{}..{}", years.front(), years.back());
}

AttributionDecision decide(const ModelFit& g0, const std::map<Driver, double>& candidates,
                           double threshold) {
  if (candidates.empty()) {
    AttributionDecision d;
    d.g0_waic = g0.waic.waic;
    return d;
  }
  return attribute(g0.waic.waic, candidates, threshold);
}

}  // namespace

ParamSummary summarize(std::vector<double> values) {
  if (values.empty()) fail(ErrorCode::InvalidArgument, "cannot summarize an empty sample");
  ParamSummary s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::sort(values.begin(), values.end());
  s.q025 = quantile_sorted(values, 0.025);
  s.q50 = quantile_sorted(values, 0.5);
  s.q975 = quantile_sorted(values, 0.975);
  return s;
}

const ModelFit* SiteResult::fit(std::string_view model) const {
  for (const auto& f : fits) {
    if (f.model == model) return &f;
  }
  return nullptr;
}

SiteCovariates build_site_covariates(const SiteRecord& site, const RunConfig& cfg) {
  SiteCovariates out;
  std::vector<int> am_years;
  std::vector<double> am_values;
  for (std::size_t i = 0; i < site.am.size(); ++i) {
    if (site.am.years[i] < cfg.start_year) continue;
    am_years.push_back(site.am.years[i]);
    am_values.push_back(site.am.discharge[i]);
  }

  std::map<CovariateKind, CovariateSeries> full;
  for (auto kind : cfg.covariates) {
    if (!is_precipitation(kind)) continue;
    if (!site.precipitation) {
      fail(ErrorCode::Validation, "site has no daily precipitation for " +
                                      std::string(to_string(kind)));
    }
    const auto d = precipitation_duration(kind);
    auto raw = d ? annual_max_precip(*site.precipitation, *d, cfg.precip_durations)
                 : annual_total_precip(*site.precipitation);
    auto smooth = loess_smooth(raw, cfg.loess_span);
    smooth.kind = kind;
    full.emplace(kind, std::move(smooth));
  }

  std::vector<int> dropped;
  for (std::size_t i = 0; i < am_years.size(); ++i) {
    const bool covered = std::all_of(full.begin(), full.end(), [&](const auto& kv) {
      return kv.second.at_year(am_years[i]).has_value();
    });
    if (covered) {
      out.observations.years.push_back(am_years[i]);
      out.observations.discharge.push_back(am_values[i]);
    } else {
      dropped.push_back(am_years[i]);
    }
  }
  if (!dropped.empty()) {
    out.warnings.push_back(fmt::format("{} annual maxima without covariate coverage dropped ({})",
                                       dropped.size(), year_range(dropped)));
  }

  const auto& years = out.observations.years;
  for (auto kind : cfg.covariates) {
    CovariateSeries s;
    if (is_precipitation(kind)) {
      s.kind = kind;
      s.years = years;
      for (int y : years) s.values.push_back(*full.at(kind).at_year(y));
    } else if (kind == CovariateKind::LandUseIntensity) {
      if (site.crops.empty()) out.warnings.push_back("no crop cells: land-use intensity is zero");
      s = land_use_intensity_series(site.crops, site.catchment_area, cfg.reference_yield, years,
                                    cfg.yield_base_year);
    } else {
      if (site.reservoirs.empty()) out.warnings.push_back("no reservoirs: reservoir index is zero");
      s = reservoir_index_series(site.reservoirs, years, site.catchment_area,
                                 site.mean_annual_flow_volume);
    }
    out.series.emplace(kind, std::move(s));
  }
  return out;
}

SiteResult run_site(const SiteRecord& site, const RunConfig& cfg) {
  validate(cfg);
  auto cov = build_site_covariates(site, cfg);
  SiteResult r;
  r.site_id = site.site_id;
  r.catchment_area = site.catchment_area;
  r.outlet_elevation = site.outlet_elevation;
  r.warnings = std::move(cov.warnings);
  const auto& obs = cov.observations;
  if (static_cast<int>(obs.size()) < cfg.min_record_length) {
    fail(ErrorCode::Validation,
         fmt::format("record has {} usable years from {}, at least {} required", obs.size(),
                     cfg.start_year, cfg.min_record_length));
  }
  r.fit_first_year = obs.years.front();
  r.fit_last_year = obs.years.back();
  r.fit_observations = static_cast<int>(obs.size());

  r.fits.push_back(fit_model(FitProblem(obs), cfg, site.site_id, std::string(kG0), std::nullopt));
  const ModelFit& g0_ref = r.fits.front();
  if (!g0_ref.diagnostics.converged && cfg.exclude_unconverged) {
    fail(ErrorCode::Sampler, "time-invariant model did not converge");
  }
  const ModelFit g0 = g0_ref;

  for (auto kind : cfg.covariates) {
    const auto& series = cov.series.at(kind);
    const std::string name(to_string(kind));
    if (is_constant(series.values)) {
      // The likelihood does not depend on b; the model is G0.
      ModelFit f = g0;
      f.model = name;
      f.covariate = kind;
      f.prior_mode = cfg.prior_mode;
      f.degenerate = true;
      f.b.reset();
      f.b_density.clear();
      r.warnings.push_back(name + " is constant over the fit years; scored as the time-invariant model");
      r.fits.push_back(std::move(f));
      continue;
    }
    const auto prior = cfg.prior_mode == PriorMode::Informative ? cfg.priors.at(kind)
                                                                : SlopePrior::flat();
    try {
      FitProblem prob(obs, series, link_form_for(kind), prior);
      auto f = fit_model(prob, cfg, site.site_id, name, kind);
      if (!f.diagnostics.converged && cfg.exclude_unconverged) {
        f.excluded = true;
        r.warnings.push_back(name + " did not converge; excluded from attribution");
      }
      r.fits.push_back(std::move(f));
    } catch (const Error& e) {
      ModelFit f;
      f.model = name;
      f.covariate = kind;
      f.prior_mode = cfg.prior_mode;
      f.excluded = true;
      f.waic = WaicReport::from_value(std::numeric_limits<double>::quiet_NaN());
      r.warnings.push_back(name + " could not be fitted (" + e.what() + "); excluded from attribution");
      r.fits.push_back(std::move(f));
    }
  }

  std::map<Driver, double> others;
  std::vector<const ModelFit*> precip_fits;
  for (const auto& f : r.fits) {
    if (!f.covariate || f.excluded) continue;
    if (is_precipitation(*f.covariate)) {
      precip_fits.push_back(&f);
    } else {
      others.emplace(driver_for(*f.covariate), f.waic.waic);
    }
  }
  for (const auto* f : precip_fits) {
    r.precip_sweep.emplace(*f->covariate,
                           attribute(g0.waic.waic, {{Driver::Atmospheric, f->waic.waic}},
                                     cfg.waic_threshold));
    auto candidates = others;
    candidates.emplace(Driver::Atmospheric, f->waic.waic);
    r.attribution_by_precip.emplace(*f->covariate,
                                    attribute(g0.waic.waic, candidates, cfg.waic_threshold));
  }

  std::optional<CovariateKind> atm;
  if (std::find(cfg.covariates.begin(), cfg.covariates.end(), cfg.atmospheric_covariate) !=
      cfg.covariates.end()) {
    atm = cfg.atmospheric_covariate;
  } else {
    for (auto k : cfg.covariates) {
      if (is_precipitation(k)) {
        atm = k;
        break;
      }
    }
  }
  r.atmospheric_covariate = atm;
  if (atm && r.attribution_by_precip.contains(*atm)) {
    r.attribution = r.attribution_by_precip.at(*atm);
  } else {
    if (atm) {
      r.warnings.push_back("atmospheric candidate " + std::string(to_string(*atm)) +
                           " unavailable; attribution without it");
    }
    r.attribution = decide(g0, others, cfg.waic_threshold);
  }

  try {
    r.trend = ols_log_trend(site.am, cfg.start_year);
  } catch (const Error& e) {
    r.warnings.push_back(std::string("trend not computed: ") + e.what());
  }
  std::vector<double> recent;
  for (std::size_t i = 0; i < site.am.size(); ++i) {
    if (site.am.years[i] >= cfg.start_year) recent.push_back(site.am.discharge[i]);
  }
  try {
    r.mk = mann_kendall(recent, cfg.mk_alpha);
  } catch (const Error& e) {
    r.warnings.push_back(std::string("Mann-Kendall not computed: ") + e.what());
  }
  std::vector<FloodDate> dates;
  for (const auto& d : site.flood_dates) {
    if (d.year >= cfg.start_year) dates.push_back(d);
  }
  if (!dates.empty()) r.seasonality = seasonality(dates);
  for (const auto& w : r.warnings) spdlog::info("site {}: {}", site.site_id, w);
  return r;
}

RunOutcome run_sites(const std::vector<SiteRecord>& sites, const RunConfig& cfg) {
  validate(cfg);
  std::vector<std::optional<SiteResult>> results(sites.size());
  std::vector<std::optional<SiteFailure>> failures(sites.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < sites.size(); i = next++) {
      try {
        results[i] = run_site(sites[i], cfg);
      } catch (const std::exception& e) {
        spdlog::warn("site {} failed: {}", sites[i].site_id, e.what());
        failures[i] = SiteFailure{sites[i].site_id, e.what()};
      }
    }
  };
  const auto n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), std::max<std::size_t>(sites.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  RunOutcome out;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (results[i]) out.results.push_back(std::move(*results[i]));
    if (failures[i]) out.failures.push_back(std::move(*failures[i]));
  }
  std::sort(out.results.begin(), out.results.end(),
            [](const SiteResult& a, const SiteResult& b) { return a.site_id < b.site_id; });
  std::sort(out.failures.begin(), out.failures.end(),
            [](const SiteFailure& a, const SiteFailure& b) { return a.site_id < b.site_id; });
  return out;
}

}  // namespace floodattr
