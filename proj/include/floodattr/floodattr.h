#ifndef FLOODATTR_FLOODATTR_H
#define FLOODATTR_FLOODATTR_H

/* C interface of the flood attribution library. All objects are opaque
 * handles; every call returns a status and leaves a message for
 * fa_last_error() on failure. Handles are not shared between threads
 * without external locking; distinct handles may be used concurrently. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(FLOODATTR_BUILDING)
#define FA_API __declspec(dllexport)
#else
#define FA_API __declspec(dllimport)
#endif
#else
#define FA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fa_status {
  FA_OK = 0,
  FA_ERR_INVALID_ARGUMENT = 1,
  FA_ERR_DOMAIN = 2,
  FA_ERR_VALIDATION = 3,
  FA_ERR_CONFIG = 4,
  FA_ERR_IO = 5,
  FA_ERR_INITIALIZATION = 6,
  FA_ERR_SAMPLER = 7,
  FA_ERR_INTERNAL = 99
} fa_status;

typedef enum fa_prior_mode { FA_PRIOR_INFORMATIVE = 0, FA_PRIOR_FLAT = 1 } fa_prior_mode;

typedef enum fa_selection {
  FA_SELECT_TIME_INVARIANT = 0,
  FA_SELECT_ATMOSPHERIC = 1,
  FA_SELECT_CATCHMENT = 2,
  FA_SELECT_RIVER_SYSTEM = 3
} fa_selection;

typedef enum fa_log_level {
  FA_LOG_DEBUG = 0,
  FA_LOG_INFO = 1,
  FA_LOG_WARN = 2,
  FA_LOG_ERROR = 3,
  FA_LOG_OFF = 4
} fa_log_level;

typedef struct fa_config fa_config;
typedef struct fa_dataset fa_dataset;
typedef struct fa_results fa_results;

/* Message of the last failed call on this thread; never NULL. */
FA_API const char* fa_last_error(void);
FA_API const char* fa_version(void);
FA_API const char* fa_status_name(fa_status status);
/* Log messages go to stderr. */
FA_API void fa_set_log_level(fa_log_level level);

/* ---- configuration ---- */
FA_API fa_status fa_config_default(fa_config** out);
FA_API fa_status fa_config_load(const char* path, fa_config** out);
FA_API fa_status fa_config_set_seed(fa_config* cfg, uint64_t seed);
FA_API fa_status fa_config_set_prior_mode(fa_config* cfg, fa_prior_mode mode);
/* Sites processed concurrently. */
FA_API fa_status fa_config_set_threads(fa_config* cfg, int threads);
/* Post-warmup iterations and warmup iterations per chain. */
FA_API fa_status fa_config_set_iterations(fa_config* cfg, int iterations, int warmup);
FA_API void fa_config_free(fa_config* cfg);

/* ---- data ---- */
FA_API fa_status fa_dataset_ingest(const char* data_dir, const fa_config* cfg, fa_dataset** out);
FA_API size_t fa_dataset_site_count(const fa_dataset* data);
/* Returns NULL when index is out of range. Valid until the dataset is freed. */
FA_API const char* fa_dataset_site_id(const fa_dataset* data, size_t index);
/* Annual maxima count of one site, or 0 when index is out of range. */
FA_API size_t fa_dataset_record_length(const fa_dataset* data, size_t index);
FA_API void fa_dataset_free(fa_dataset* data);

/* ---- runs and results ---- */
FA_API fa_status fa_run(const fa_dataset* data, const fa_config* cfg, fa_results** out);
FA_API fa_status fa_results_load(const char* jsonl_path, fa_results** out);
FA_API size_t fa_results_site_count(const fa_results* res);
FA_API size_t fa_results_failure_count(const fa_results* res);
FA_API const char* fa_results_site_id(const fa_results* res, size_t index);
FA_API fa_status fa_results_selection(const fa_results* res, size_t index, fa_selection* out);
FA_API const char* fa_results_failure_site(const fa_results* res, size_t index);
FA_API const char* fa_results_failure_message(const fa_results* res, size_t index);
/* Writes the result records and plot-ready tables into out_dir. */
FA_API fa_status fa_report_write(const fa_results* res, const char* out_dir);
FA_API void fa_results_free(fa_results* res);

/* ---- synthetic sites ---- */
typedef enum fa_true_model {
  FA_TRUE_TIME_INVARIANT = 0,
  FA_TRUE_ATMOSPHERIC = 1,
  FA_TRUE_CATCHMENT = 2,
  FA_TRUE_RIVER_SYSTEM = 3
} fa_true_model;

typedef struct fa_synth_options {
  int sites;          /* number of sites, ids SYN001.. */
  fa_true_model model;
  double b;           /* slope of the true model */
  double sigma;       /* Gumbel scale, m3/s */
  double mu0;         /* location at the reference covariate level, m3/s */
  int start_year;
  int n_years;
  uint64_t seed;
  double precip_trend;  /* relative rise of annual precipitation over the record */
} fa_synth_options;

FA_API void fa_synth_options_default(fa_synth_options* opts);
FA_API fa_status fa_synth_write(const fa_synth_options* opts, const char* data_dir);

/* ---- numerical building blocks ---- */
FA_API fa_status fa_gumbel_cdf(double z, double mu, double sigma, double* out);
FA_API fa_status fa_gumbel_logpdf(double z, double mu, double sigma, double* out);
FA_API fa_status fa_gumbel_quantile(double p, double mu, double sigma, double* out);
/* Arrays of length n describe reservoirs upstream of the gauge. */
FA_API fa_status fa_reservoir_index(size_t n, const int* year_built, const double* capacity,
                                    const double* drainage_area, int year, double catchment_area,
                                    double mean_annual_flow_volume, double* out);
/* candidate_waic holds the Atmospheric, Catchment and RiverSystem WAIC; NaN
 * marks a missing candidate. */
FA_API fa_status fa_attribute(double g0_waic, const double candidate_waic[3], double threshold,
                              fa_selection* selected, double* margin);

#ifdef __cplusplus
}
#endif

#endif
