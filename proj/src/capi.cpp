#include "floodattr/floodattr.h"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <mutex>
#include <string>

#include "floodattr/error.hpp"
#include "floodattr/pipeline.hpp"

struct fa_config {
  floodattr::RunConfig cfg;
};

struct fa_dataset {
  std::vector<floodattr::SiteRecord> sites;
};

struct fa_results {
  floodattr::RunOutcome outcome;
};

namespace {

using floodattr::ErrorCode;

thread_local std::string g_last_error;

void ensure_logger() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("floodattr");
    logger->set_pattern("[%l] %v");
    logger->set_level(spdlog::level::warn);
    spdlog::set_default_logger(std::move(logger));
  });
}

fa_status status_of(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument:
      return FA_ERR_INVALID_ARGUMENT;
    case ErrorCode::Domain:
      return FA_ERR_DOMAIN;
    case ErrorCode::Validation:
      return FA_ERR_VALIDATION;
    case ErrorCode::Config:
      return FA_ERR_CONFIG;
    case ErrorCode::Io:
      return FA_ERR_IO;
    case ErrorCode::Initialization:
      return FA_ERR_INITIALIZATION;
    case ErrorCode::Sampler:
      return FA_ERR_SAMPLER;
  }
  return FA_ERR_INTERNAL;
}

// Runs fn, translating exceptions into status codes.
template <class F>
fa_status guarded(F&& fn) noexcept {
  try {
    ensure_logger();
    g_last_error.clear();
    fn();
    return FA_OK;
  } catch (const floodattr::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FA_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return FA_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) floodattr::fail(ErrorCode::InvalidArgument, what);
}

fa_selection selection_code(floodattr::Selection s) {
  switch (s) {
    case floodattr::Selection::TimeInvariant:
      return FA_SELECT_TIME_INVARIANT;
    case floodattr::Selection::Atmospheric:
      return FA_SELECT_ATMOSPHERIC;
    case floodattr::Selection::Catchment:
      return FA_SELECT_CATCHMENT;
    case floodattr::Selection::RiverSystem:
      return FA_SELECT_RIVER_SYSTEM;
  }
  return FA_SELECT_TIME_INVARIANT;
}

}  // namespace

extern "C" {

const char* fa_last_error(void) { return g_last_error.c_str(); }

const char* fa_version(void) { return "0.1.0"; }

const char* fa_status_name(fa_status status) {
  switch (status) {
    case FA_OK:
      return "ok";
    case FA_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case FA_ERR_DOMAIN:
      return "domain error";
    case FA_ERR_VALIDATION:
      return "validation error";
    case FA_ERR_CONFIG:
      return "configuration error";
    case FA_ERR_IO:
      return "i/o error";
    case FA_ERR_INITIALIZATION:
      return "initialization error";
    case FA_ERR_SAMPLER:
      return "sampler error";
    case FA_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

void fa_set_log_level(fa_log_level level) {
  ensure_logger();
  switch (level) {
    case FA_LOG_DEBUG:
      spdlog::set_level(spdlog::level::debug);
      break;
    case FA_LOG_INFO:
      spdlog::set_level(spdlog::level::info);
      break;
    case FA_LOG_WARN:
      spdlog::set_level(spdlog::level::warn);
      break;
    case FA_LOG_ERROR:
      spdlog::set_level(spdlog::level::err);
      break;
    case FA_LOG_OFF:
      spdlog::set_level(spdlog::level::off);
      break;
  }
}

fa_status fa_config_default(fa_config** out) {
  return guarded([&] {
    require(out != nullptr, "output pointer is NULL");
    *out = new fa_config{};
  });
}

fa_status fa_config_load(const char* path, fa_config** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "NULL argument");
    auto cfg = floodattr::load_config(path);
    *out = new fa_config{std::move(cfg)};
  });
}

fa_status fa_config_set_seed(fa_config* cfg, uint64_t seed) {
  return guarded([&] {
    require(cfg != nullptr, "config is NULL");
    cfg->cfg.seed = seed;
    cfg->cfg.sampler.seed = seed;
  });
}

fa_status fa_config_set_prior_mode(fa_config* cfg, fa_prior_mode mode) {
  return guarded([&] {
    require(cfg != nullptr, "config is NULL");
    require(mode == FA_PRIOR_INFORMATIVE || mode == FA_PRIOR_FLAT, "unknown prior mode");
    cfg->cfg.prior_mode =
        mode == FA_PRIOR_FLAT ? floodattr::PriorMode::Flat : floodattr::PriorMode::Informative;
  });
}

fa_status fa_config_set_threads(fa_config* cfg, int threads) {
  return guarded([&] {
    require(cfg != nullptr, "config is NULL");
    require(threads >= 1, "threads must be >= 1");
    cfg->cfg.threads = threads;
  });
}

fa_status fa_config_set_iterations(fa_config* cfg, int iterations, int warmup) {
  return guarded([&] {
    require(cfg != nullptr, "config is NULL");
    auto next = cfg->cfg;
    next.sampler.iterations = iterations;
    next.sampler.warmup = warmup;
    floodattr::validate(next.sampler);
    cfg->cfg = std::move(next);
  });
}

void fa_config_free(fa_config* cfg) { delete cfg; }

fa_status fa_dataset_ingest(const char* data_dir, const fa_config* cfg, fa_dataset** out) {
  return guarded([&] {
    require(data_dir != nullptr && cfg != nullptr && out != nullptr, "NULL argument");
    auto sites = floodattr::ingest(data_dir, cfg->cfg);
    *out = new fa_dataset{std::move(sites)};
  });
}

size_t fa_dataset_site_count(const fa_dataset* data) { return data ? data->sites.size() : 0; }

const char* fa_dataset_site_id(const fa_dataset* data, size_t index) {
  if (!data || index >= data->sites.size()) return nullptr;
  return data->sites[index].site_id.c_str();
}

size_t fa_dataset_record_length(const fa_dataset* data, size_t index) {
  if (!data || index >= data->sites.size()) return 0;
  return data->sites[index].am.size();
}

void fa_dataset_free(fa_dataset* data) { delete data; }

fa_status fa_run(const fa_dataset* data, const fa_config* cfg, fa_results** out) {
  return guarded([&] {
    require(data != nullptr && cfg != nullptr && out != nullptr, "NULL argument");
    auto outcome = floodattr::run_sites(data->sites, cfg->cfg);
    *out = new fa_results{std::move(outcome)};
  });
}

fa_status fa_results_load(const char* jsonl_path, fa_results** out) {
  return guarded([&] {
    require(jsonl_path != nullptr && out != nullptr, "NULL argument");
    auto outcome = floodattr::read_results_jsonl(jsonl_path);
    *out = new fa_results{std::move(outcome)};
  });
}

size_t fa_results_site_count(const fa_results* res) { return res ? res->outcome.results.size() : 0; }

size_t fa_results_failure_count(const fa_results* res) {
  return res ? res->outcome.failures.size() : 0;
}

const char* fa_results_site_id(const fa_results* res, size_t index) {
  if (!res || index >= res->outcome.results.size()) return nullptr;
  return res->outcome.results[index].site_id.c_str();
}

fa_status fa_results_selection(const fa_results* res, size_t index, fa_selection* out) {
  return guarded([&] {
    require(res != nullptr && out != nullptr, "NULL argument");
    require(index < res->outcome.results.size(), "site index out of range");
    *out = selection_code(res->outcome.results[index].attribution.selected);
  });
}

const char* fa_results_failure_site(const fa_results* res, size_t index) {
  if (!res || index >= res->outcome.failures.size()) return nullptr;
  return res->outcome.failures[index].site_id.c_str();
}

const char* fa_results_failure_message(const fa_results* res, size_t index) {
  if (!res || index >= res->outcome.failures.size()) return nullptr;
  return res->outcome.failures[index].message.c_str();
}

fa_status fa_report_write(const fa_results* res, const char* out_dir) {
  return guarded([&] {
    require(res != nullptr && out_dir != nullptr, "NULL argument");
    floodattr::report(res->outcome, out_dir);
  });
}

void fa_results_free(fa_results* res) { delete res; }

void fa_synth_options_default(fa_synth_options* opts) {
  if (!opts) return;
  const floodattr::SyntheticSuite s;
  opts->sites = s.sites;
  opts->model = FA_TRUE_TIME_INVARIANT;
  opts->b = s.b;
  opts->sigma = s.sigma;
  opts->mu0 = s.mu0;
  opts->start_year = s.start_year;
  opts->n_years = s.n_years;
  opts->seed = s.seed;
  opts->precip_trend = s.precip_trend;
}

fa_status fa_synth_write(const fa_synth_options* opts, const char* data_dir) {
  return guarded([&] {
    require(opts != nullptr && data_dir != nullptr, "NULL argument");
    floodattr::SyntheticSuite s;
    s.sites = opts->sites;
    switch (opts->model) {
      case FA_TRUE_TIME_INVARIANT:
        s.model = floodattr::TrueModel::TimeInvariant;
        break;
      case FA_TRUE_ATMOSPHERIC:
        s.model = floodattr::TrueModel::Atmospheric;
        break;
      case FA_TRUE_CATCHMENT:
        s.model = floodattr::TrueModel::Catchment;
        break;
      case FA_TRUE_RIVER_SYSTEM:
        s.model = floodattr::TrueModel::RiverSystem;
        break;
      default:
        floodattr::fail(ErrorCode::InvalidArgument, "unknown true model");
    }
    s.b = opts->b;
    s.sigma = opts->sigma;
    s.mu0 = opts->mu0;
    s.start_year = opts->start_year;
    s.n_years = opts->n_years;
    s.seed = opts->seed;
    s.precip_trend = opts->precip_trend;
    std::vector<floodattr::SiteRecord> sites;
    for (const auto& spec : floodattr::synthetic_suite(s)) {
      sites.push_back(floodattr::generate_synthetic_site(spec));
    }
    floodattr::write_site_data(sites, data_dir);
  });
}

fa_status fa_gumbel_cdf(double z, double mu, double sigma, double* out) {
  return guarded([&] {
    require(out != nullptr, "output pointer is NULL");
    *out = floodattr::gumbel_cdf(z, floodattr::GumbelParams(mu, sigma));
  });
}

fa_status fa_gumbel_logpdf(double z, double mu, double sigma, double* out) {
  return guarded([&] {
    require(out != nullptr, "output pointer is NULL");
    *out = floodattr::gumbel_logpdf(z, floodattr::GumbelParams(mu, sigma));
  });
}

fa_status fa_gumbel_quantile(double p, double mu, double sigma, double* out) {
  return guarded([&] {
    require(out != nullptr, "output pointer is NULL");
    *out = floodattr::gumbel_quantile(p, floodattr::GumbelParams(mu, sigma));
  });
}

fa_status fa_reservoir_index(size_t n, const int* year_built, const double* capacity,
                             const double* drainage_area, int year, double catchment_area,
                             double mean_annual_flow_volume, double* out) {
  return guarded([&] {
    require(out != nullptr, "output pointer is NULL");
    require(n == 0 || (year_built && capacity && drainage_area), "reservoir arrays are NULL");
    std::vector<floodattr::ReservoirRecord> rs(n);
    for (size_t i = 0; i < n; ++i) rs[i] = {year_built[i], capacity[i], drainage_area[i]};
    *out = floodattr::reservoir_index(rs, year, catchment_area, mean_annual_flow_volume);
  });
}

fa_status fa_attribute(double g0_waic, const double candidate_waic[3], double threshold,
                       fa_selection* selected, double* margin) {
  return guarded([&] {
    require(candidate_waic != nullptr && selected != nullptr, "NULL argument");
    std::map<floodattr::Driver, double> c;
    const floodattr::Driver order[3] = {floodattr::Driver::Atmospheric,
                                        floodattr::Driver::Catchment,
                                        floodattr::Driver::RiverSystem};
    for (int i = 0; i < 3; ++i) {
      if (!std::isnan(candidate_waic[i])) c.emplace(order[i], candidate_waic[i]);
    }
    const auto d = floodattr::attribute(g0_waic, c, threshold);
    *selected = selection_code(d.selected);
    if (margin) *margin = d.margin;
  });
}

}  // extern "C"
