// Command-line front end. Talks to the library through the C API only.

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "floodattr/floodattr.h"

namespace {

struct ConfigDeleter {
  void operator()(fa_config* c) const { fa_config_free(c); }
};
struct DatasetDeleter {
  void operator()(fa_dataset* d) const { fa_dataset_free(d); }
};
struct ResultsDeleter {
  void operator()(fa_results* r) const { fa_results_free(r); }
};
using ConfigPtr = std::unique_ptr<fa_config, ConfigDeleter>;
using DatasetPtr = std::unique_ptr<fa_dataset, DatasetDeleter>;
using ResultsPtr = std::unique_ptr<fa_results, ResultsDeleter>;

// Thrown to unwind with the library status as exit code.
struct Failed {
  int code;
};

void check(fa_status s, const char* what) {
  if (s == FA_OK) return;
  std::fprintf(stderr, "error: %s: %s (%s)\n", what, fa_last_error(), fa_status_name(s));
  throw Failed{static_cast<int>(s)};
}

const char* selection_name(fa_selection s) {
  switch (s) {
    case FA_SELECT_TIME_INVARIANT:
      return "TimeInvariant";
    case FA_SELECT_ATMOSPHERIC:
      return "Atmospheric";
    case FA_SELECT_CATCHMENT:
      return "Catchment";
    case FA_SELECT_RIVER_SYSTEM:
      return "RiverSystem";
  }
  return "?";
}

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string prior_mode;
  std::optional<int> threads;
};

ConfigPtr make_config(const CommonOptions& o) {
  fa_config* raw = nullptr;
  if (o.config.empty()) {
    check(fa_config_default(&raw), "default configuration");
  } else {
    check(fa_config_load(o.config.c_str(), &raw), "loading configuration");
  }
  ConfigPtr cfg(raw);
  if (o.seed) check(fa_config_set_seed(cfg.get(), *o.seed), "seed override");
  if (!o.prior_mode.empty()) {
    const auto mode = o.prior_mode == "flat" ? FA_PRIOR_FLAT : FA_PRIOR_INFORMATIVE;
    check(fa_config_set_prior_mode(cfg.get(), mode), "prior mode");
  }
  if (o.threads) check(fa_config_set_threads(cfg.get(), *o.threads), "threads");
  return cfg;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config, "YAML run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "override the master seed");
  cmd->add_option("--prior-mode", o.prior_mode, "slope priors")
      ->check(CLI::IsMember({"informative", "flat"}));
  cmd->add_option("--threads", o.threads, "sites processed concurrently")->check(CLI::PositiveNumber);
}

DatasetPtr load_data(const std::string& dir, const fa_config* cfg) {
  fa_dataset* raw = nullptr;
  check(fa_dataset_ingest(dir.c_str(), cfg, &raw), "ingesting data");
  return DatasetPtr(raw);
}

void print_outcome(const fa_results* res) {
  for (size_t i = 0; i < fa_results_site_count(res); ++i) {
    fa_selection sel = FA_SELECT_TIME_INVARIANT;
    check(fa_results_selection(res, i, &sel), "reading results");
    std::printf("%s\t%s\n", fa_results_site_id(res, i), selection_name(sel));
  }
  for (size_t i = 0; i < fa_results_failure_count(res); ++i) {
    std::fprintf(stderr, "site %s failed: %s\n", fa_results_failure_site(res, i),
                 fa_results_failure_message(res, i));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribute changes in annual flood peaks to atmospheric, catchment or "
               "river-system drivers."};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "debug, info, warn, error or off")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));
  app.set_version_flag("--version", std::string(fa_version()));

  CommonOptions check_opts;
  std::string check_data;
  auto* ingest_check = app.add_subcommand("ingest-check", "validate a data directory");
  ingest_check->add_option("-d,--data", check_data, "data directory")->required();
  add_common(ingest_check, check_opts);

  CommonOptions run_opts;
  std::string run_data;
  std::string run_out;
  auto* run = app.add_subcommand("run", "fit all sites and write results");
  run->add_option("-d,--data", run_data, "data directory")->required();
  run->add_option("-o,--out", run_out, "output directory")->required();
  add_common(run, run_opts);

  std::string synth_out;
  std::string synth_model = "G0";
  fa_synth_options synth_opts;
  fa_synth_options_default(&synth_opts);
  auto* synth = app.add_subcommand("synth", "write a synthetic data directory");
  synth->add_option("-o,--out", synth_out, "data directory to create")->required();
  synth->add_option("--model", synth_model, "true model")
      ->check(CLI::IsMember({"G0", "Atmospheric", "Catchment", "RiverSystem"}));
  synth->add_option("--sites", synth_opts.sites, "number of sites")->capture_default_str();
  synth->add_option("--b", synth_opts.b, "slope of the true model")->capture_default_str();
  synth->add_option("--sigma", synth_opts.sigma, "Gumbel scale (m3/s)")->capture_default_str();
  synth->add_option("--mu0", synth_opts.mu0, "location at the mean covariate (m3/s)")
      ->capture_default_str();
  synth->add_option("--start-year", synth_opts.start_year, "first year")->capture_default_str();
  synth->add_option("--years", synth_opts.n_years, "record length")->capture_default_str();
  synth->add_option("--seed", synth_opts.seed, "generator seed")->capture_default_str();
  synth->add_option("--precip-trend", synth_opts.precip_trend,
                    "relative rise of annual precipitation over the record")
      ->capture_default_str();

  std::string report_results;
  std::string report_out;
  auto* rep = app.add_subcommand("report", "rewrite tables from a results file");
  rep->add_option("-r,--results", report_results, "site_results.jsonl")
      ->required()
      ->check(CLI::ExistingFile);
  rep->add_option("-o,--out", report_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  const std::map<std::string, fa_log_level> levels{{"debug", FA_LOG_DEBUG},
                                                   {"info", FA_LOG_INFO},
                                                   {"warn", FA_LOG_WARN},
                                                   {"error", FA_LOG_ERROR},
                                                   {"off", FA_LOG_OFF}};
  fa_set_log_level(levels.at(log_level));

  try {
    if (*ingest_check) {
      const auto cfg = make_config(check_opts);
      const auto data = load_data(check_data, cfg.get());
      const size_t n = fa_dataset_site_count(data.get());
      for (size_t i = 0; i < n; ++i) {
        std::printf("%s\t%zu years\n", fa_dataset_site_id(data.get(), i),
                    fa_dataset_record_length(data.get(), i));
      }
      std::printf("ok: %zu sites\n", n);
    } else if (*run) {
      const auto cfg = make_config(run_opts);
      const auto data = load_data(run_data, cfg.get());
      fa_results* raw = nullptr;
      check(fa_run(data.get(), cfg.get(), &raw), "running sites");
      const ResultsPtr res(raw);
      print_outcome(res.get());
      check(fa_report_write(res.get(), run_out.c_str()), "writing outputs");
      std::printf("wrote %s (%zu sites, %zu failures)\n", run_out.c_str(),
                  fa_results_site_count(res.get()), fa_results_failure_count(res.get()));
    } else if (*synth) {
      const std::map<std::string, fa_true_model> models{{"G0", FA_TRUE_TIME_INVARIANT},
                                                        {"Atmospheric", FA_TRUE_ATMOSPHERIC},
                                                        {"Catchment", FA_TRUE_CATCHMENT},
                                                        {"RiverSystem", FA_TRUE_RIVER_SYSTEM}};
      synth_opts.model = models.at(synth_model);
      check(fa_synth_write(&synth_opts, synth_out.c_str()), "writing synthetic data");
      std::printf("wrote %d synthetic sites to %s\n", synth_opts.sites, synth_out.c_str());
    } else if (*rep) {
      fa_results* raw = nullptr;
      check(fa_results_load(report_results.c_str(), &raw), "reading results");
      const ResultsPtr res(raw);
      // fully loaded above, so --out may be the directory the results came from
      check(fa_report_write(res.get(), report_out.c_str()), "writing outputs");
      std::printf("wrote %s\n", report_out.c_str());
    }
  } catch (const Failed& f) {
    return f.code;
  }
  return 0;
}
