#pragma once

// Per-site orchestration: covariates, model fits, WAIC, attribution and
// trend statistics; plus ingestion, configuration, synthetic sites and
// report files.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "floodattr/bayes.hpp"
#include "floodattr/covariates.hpp"
#include "floodattr/selection.hpp"
#include "floodattr/trend.hpp"

namespace floodattr {

struct SiteRecord {
  std::string site_id;
  double catchment_area = 0.0;           // km2
  double outlet_elevation = 0.0;         // m
  double mean_annual_flow_volume = 0.0;  // 1e6 m3
  AnnualMaxSeries am;
  std::optional<DailySeries> precipitation;
  std::vector<CropCell> crops;
  std::vector<ReservoirRecord> reservoirs;
  std::vector<FloodDate> flood_dates;
};

enum class PriorMode { Informative, Flat };

[[nodiscard]] std::string_view to_string(PriorMode m) noexcept;
[[nodiscard]] std::optional<PriorMode> parse_prior_mode(std::string_view s) noexcept;

// Link form and driver class used for a covariate.
[[nodiscard]] LinkForm link_form_for(CovariateKind kind) noexcept;
[[nodiscard]] Driver driver_for(CovariateKind kind) noexcept;

// Literature-derived elasticity priors: 0.61 (sd 0.06) for annual
// precipitation, 0.61 (sd 0.18) for the extreme precipitation series, both
// truncated below zero; 0.13 (sd 0.13) for land-use intensity, truncated
// below zero; -0.30 (sd 0.18) for the reservoir index, truncated above zero.
[[nodiscard]] std::map<CovariateKind, SlopePrior> default_prior_table();

struct RunConfig {
  std::vector<CovariateKind> covariates{kAllCovariateKinds.begin(), kAllCovariateKinds.end()};
  CovariateKind atmospheric_covariate = CovariateKind::MaxP1;
  PriorMode prior_mode = PriorMode::Informative;
  std::map<CovariateKind, SlopePrior> priors = default_prior_table();
  SamplerConfig sampler;
  double waic_threshold = kDefaultWaicThreshold;
  int start_year = kDefaultStartYear;
  int min_record_length = 40;
  int loess_span = 10;
  double reference_yield = kDefaultReferenceYield;
  int yield_base_year = 2000;
  std::vector<int> precip_durations{kDefaultDurations.begin(), kDefaultDurations.end()};
  double mk_alpha = 0.05;
  std::uint64_t seed = 20190101;
  int threads = 1;                  // sites processed concurrently
  bool exclude_unconverged = true;  // unconverged candidates leave the attribution
  int density_grid_points = 64;
};

void validate(const RunConfig& cfg);
// Loads a YAML run configuration on top of the defaults. Unknown keys are
// errors.
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);
[[nodiscard]] RunConfig parse_config(const std::string& yaml_text);

struct ParamSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

[[nodiscard]] ParamSummary summarize(std::vector<double> values);

struct DiagnosticsSummary {
  bool converged = false;
  std::optional<double> max_rhat;
  double min_ess = 0.0;
  int divergences = 0;
  bool stuck_chain = false;
  bool indeterminate = false;
};

struct ModelFit {
  std::string model;                     // "G0" or the covariate name
  std::optional<CovariateKind> covariate;
  PriorMode prior_mode = PriorMode::Flat;
  WaicReport waic;
  ParamSummary a;
  std::optional<ParamSummary> b;
  ParamSummary sigma;
  DiagnosticsSummary diagnostics;
  bool degenerate = false;  // constant covariate: not fitted, WAIC taken from G0
  bool excluded = false;    // left out of the attribution
  std::vector<std::pair<double, double>> b_density;  // (b, density) grid
};

struct SiteResult {
  std::string site_id;
  double catchment_area = 0.0;
  double outlet_elevation = 0.0;
  int fit_first_year = 0;
  int fit_last_year = 0;
  int fit_observations = 0;
  std::vector<ModelFit> fits;  // G0 first, then covariates in configuration order
  // Each precipitation covariate against G0 alone.
  std::map<CovariateKind, AttributionDecision> precip_sweep;
  // Four-way comparison using each precipitation covariate as the
  // atmospheric candidate.
  std::map<CovariateKind, AttributionDecision> attribution_by_precip;
  std::optional<CovariateKind> atmospheric_covariate;
  AttributionDecision attribution;
  std::optional<TrendResult> trend;
  std::optional<MkResult> mk;
  std::optional<SeasonalityResult> seasonality;
  std::vector<std::string> warnings;

  [[nodiscard]] const ModelFit* fit(std::string_view model) const;
};

struct SiteFailure {
  std::string site_id;
  std::string message;
};

struct RunOutcome {
  std::vector<SiteResult> results;    // sorted by site_id
  std::vector<SiteFailure> failures;  // sorted by site_id
};

// Covariate series aligned to the fit years (exposed for inspection).
struct SiteCovariates {
  AnnualMaxSeries observations;
  std::map<CovariateKind, CovariateSeries> series;
  std::vector<std::string> warnings;
};

[[nodiscard]] SiteCovariates build_site_covariates(const SiteRecord& site, const RunConfig& cfg);
[[nodiscard]] SiteResult run_site(const SiteRecord& site, const RunConfig& cfg);
// Processes every site; per-site failures are collected, never dropped.
[[nodiscard]] RunOutcome run_sites(const std::vector<SiteRecord>& sites, const RunConfig& cfg);

// ---- ingestion -----------------------------------------------------------

struct DataFiles {
  static constexpr const char* kSites = "sites.csv";
  static constexpr const char* kAnnualMax = "am.csv";
  static constexpr const char* kPrecipitation = "precip.csv";
  static constexpr const char* kCrops = "crops.csv";
  static constexpr const char* kReservoirs = "reservoirs.csv";
  static constexpr const char* kFloodDates = "flood_dates.csv";
};

// Reads and validates a data directory. Throws Error(Validation) naming the
// file, line and rule on the first problem.
[[nodiscard]] std::vector<SiteRecord> ingest(const std::filesystem::path& data_dir,
                                             const RunConfig& cfg);
void write_site_data(const std::vector<SiteRecord>& sites, const std::filesystem::path& data_dir);

// ---- synthetic sites -----------------------------------------------------

enum class TrueModel { TimeInvariant, Atmospheric, Catchment, RiverSystem };

[[nodiscard]] std::string_view to_string(TrueModel m) noexcept;
[[nodiscard]] std::optional<TrueModel> parse_true_model(std::string_view s) noexcept;

struct SyntheticSpec {
  std::string site_id = "SYN001";
  TrueModel model = TrueModel::TimeInvariant;
  CovariateKind precip_kind = CovariateKind::MaxP1;  // driver of the atmospheric model
  double a = std::log(100.0);
  double b = 0.0;
  double sigma = 20.0;
  int start_year = kDefaultStartYear;
  int n_years = 60;
  std::uint64_t seed = 1;
  // Annual driver precipitation before smoothing: level * (1 + trend * t) +
  // level * amplitude * sin(2 pi i / period + phase), i the year index and
  // t = i / (n - 1). The covariate is its LOESS smooth.
  double precip_level = 50.0;
  double precip_trend = 0.0;
  double precip_amplitude = 0.15;
  double precip_period = 25.0;
  double precip_phase = 0.0;
  double catchment_area = 500.0;
  double outlet_elevation = 400.0;
  double mean_annual_flow_volume = 300.0;
  double crop_share = 0.1;
  double yield_2000 = 8.0;
  double yield_trend = 0.1;
  std::vector<ReservoirRecord> reservoirs;
  bool flood_dates = true;
};

[[nodiscard]] SiteRecord generate_synthetic_site(const SyntheticSpec& spec);
// Annual precipitation of the driving kind before smoothing, one value per
// year.
[[nodiscard]] std::vector<double> synthetic_precip_target(const SyntheticSpec& spec);

// A family of sites sharing one true model; sizes, phases and seeds vary
// per site. mu0 is the location at the mean covariate level.
struct SyntheticSuite {
  int sites = 5;
  TrueModel model = TrueModel::TimeInvariant;
  double b = 0.61;
  double sigma = 20.0;
  double mu0 = 100.0;
  int start_year = kDefaultStartYear;
  int n_years = 60;
  std::uint64_t seed = 1;
  double precip_trend = 0.5;
};

[[nodiscard]] std::vector<SyntheticSpec> synthetic_suite(const SyntheticSuite& suite);

// ---- reporting -----------------------------------------------------------

inline constexpr int kSchemaVersion = 1;

void write_results_jsonl(const RunOutcome& outcome, const std::filesystem::path& file);
[[nodiscard]] RunOutcome read_results_jsonl(const std::filesystem::path& file);
// Writes the per-site records, the regional occurrence table and the
// plot-ready series. Refuses an outcome without results.
void report(const RunOutcome& outcome, const std::filesystem::path& out_dir);

}  // namespace floodattr
