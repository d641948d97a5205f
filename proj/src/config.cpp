#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "floodattr/error.hpp"
#include "floodattr/pipeline.hpp"

namespace floodattr {

namespace {

[[noreturn]] void config_error(const std::string& what) { fail(ErrorCode::Config, what); }

void reject_unknown(const YAML::Node& map, const std::set<std::string>& known,
                    const std::string& where) {
  if (!map.IsMap()) config_error(where + " must be a mapping");
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!known.contains(key)) config_error("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& key) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    config_error("invalid value for '" + key + "'");
  }
}

CovariateKind covariate_from(const YAML::Node& n, const std::string& key) {
  const auto name = scalar<std::string>(n, key);
  const auto kind = parse_covariate_kind(name);
  if (!kind) config_error("unknown covariate '" + name + "' in '" + key + "'");
  return *kind;
}

SlopePrior prior_from(const YAML::Node& n, const std::string& where) {
  reject_unknown(n, {"mean", "sd", "truncation"}, where);
  if (!n["mean"] || !n["sd"]) config_error(where + " needs 'mean' and 'sd'");
  Truncation t = Truncation::None;
  if (n["truncation"]) {
    const auto s = scalar<std::string>(n["truncation"], where + ".truncation");
    if (s == "lower") {
      t = Truncation::LowerAtZero;
    } else if (s == "upper") {
      t = Truncation::UpperAtZero;
    } else if (s != "none") {
      config_error(where + ".truncation must be lower, upper or none");
    }
  }
  try {
    return SlopePrior::truncated_normal(scalar<double>(n["mean"], where + ".mean"),
                                        scalar<double>(n["sd"], where + ".sd"), t);
  } catch (const Error& e) {
    config_error(where + ": " + e.what());
  }
}

void apply_sampler(const YAML::Node& n, RunConfig& cfg, std::optional<std::uint64_t>& seed) {
  reject_unknown(n,
                 {"chains", "iterations", "warmup", "seed", "leapfrog_steps", "target_acceptance",
                  "step_size_min", "step_size_max", "max_init_attempts", "threads"},
                 "sampler");
  auto& s = cfg.sampler;
  if (n["chains"]) s.chains = scalar<int>(n["chains"], "sampler.chains");
  if (n["iterations"]) s.iterations = scalar<int>(n["iterations"], "sampler.iterations");
  if (n["warmup"]) s.warmup = scalar<int>(n["warmup"], "sampler.warmup");
  if (n["seed"]) seed = scalar<std::uint64_t>(n["seed"], "sampler.seed");
  if (n["leapfrog_steps"]) {
    s.leapfrog_steps = scalar<int>(n["leapfrog_steps"], "sampler.leapfrog_steps");
  }
  if (n["target_acceptance"]) {
    s.target_acceptance = scalar<double>(n["target_acceptance"], "sampler.target_acceptance");
  }
  if (n["step_size_min"]) s.step_size_min = scalar<double>(n["step_size_min"], "sampler.step_size_min");
  if (n["step_size_max"]) s.step_size_max = scalar<double>(n["step_size_max"], "sampler.step_size_max");
  if (n["max_init_attempts"]) {
    s.max_init_attempts = scalar<int>(n["max_init_attempts"], "sampler.max_init_attempts");
  }
  if (n["threads"]) s.threads = scalar<int>(n["threads"], "sampler.threads");
}

}  // namespace

std::string_view to_string(PriorMode m) noexcept {
  return m == PriorMode::Informative ? "informative" : "flat";
}

std::optional<PriorMode> parse_prior_mode(std::string_view s) noexcept {
  if (s == "informative") return PriorMode::Informative;
  if (s == "flat") return PriorMode::Flat;
  return std::nullopt;
}

LinkForm link_form_for(CovariateKind kind) noexcept {
  return is_precipitation(kind) ? LinkForm::LogLog : LinkForm::LogLinear;
}

Driver driver_for(CovariateKind kind) noexcept {
  switch (kind) {
    case CovariateKind::LandUseIntensity:
      return Driver::Catchment;
    case CovariateKind::ReservoirIndex:
      return Driver::RiverSystem;
    default:
      return Driver::Atmospheric;
  }
}

std::map<CovariateKind, SlopePrior> default_prior_table() {
  const auto lower = Truncation::LowerAtZero;
  return {
      {CovariateKind::AnnualTotalP, SlopePrior::truncated_normal(0.61, 0.06, lower)},
      {CovariateKind::MaxP30, SlopePrior::truncated_normal(0.61, 0.18, lower)},
      {CovariateKind::MaxP7, SlopePrior::truncated_normal(0.61, 0.18, lower)},
      {CovariateKind::MaxP1, SlopePrior::truncated_normal(0.61, 0.18, lower)},
      {CovariateKind::LandUseIntensity, SlopePrior::truncated_normal(0.13, 0.13, lower)},
      {CovariateKind::ReservoirIndex,
       SlopePrior::truncated_normal(-0.30, 0.18, Truncation::UpperAtZero)},
  };
}

void validate(const RunConfig& cfg) {
  validate(cfg.sampler);
  if (cfg.covariates.empty()) config_error("at least one covariate must be selected");
  std::set<CovariateKind> seen;
  for (auto k : cfg.covariates) {
    if (!seen.insert(k).second) config_error("covariate listed twice: " + std::string(to_string(k)));
    if (!cfg.priors.contains(k)) {
      config_error("no prior for covariate " + std::string(to_string(k)));
    }
    if (auto d = precipitation_duration(k)) {
      if (std::find(cfg.precip_durations.begin(), cfg.precip_durations.end(), *d) ==
          cfg.precip_durations.end()) {
        config_error("covariate " + std::string(to_string(k)) +
                     " uses a duration missing from precip_durations");
      }
    }
  }
  if (!is_precipitation(cfg.atmospheric_covariate)) {
    config_error("atmospheric_covariate must be a precipitation covariate");
  }
  if (std::isnan(cfg.waic_threshold) || cfg.waic_threshold < 0.0) {
    config_error("waic_threshold must be >= 0");
  }
  if (cfg.min_record_length < 10) config_error("min_record_length must be >= 10");
  if (cfg.loess_span < 1) config_error("loess_span must be >= 1");
  if (!(cfg.reference_yield > 0.0)) config_error("reference_yield must be > 0");
  if (!(cfg.mk_alpha > 0.0 && cfg.mk_alpha < 1.0)) config_error("mk_alpha must be in (0, 1)");
  if (cfg.threads < 1) config_error("threads must be >= 1");
  if (cfg.density_grid_points < 2) config_error("density_grid_points must be >= 2");
  for (int d : cfg.precip_durations) {
    if (d < 1 || d > 365) config_error("precip_durations entries must be in [1, 365]");
  }
}

RunConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    config_error(std::string("config is not valid YAML: ") + e.what());
  }
  RunConfig cfg;
  if (root.IsNull()) return cfg;
  reject_unknown(root,
                 {"covariates", "atmospheric_covariate", "prior_mode", "priors", "sampler",
                  "waic_threshold", "start_year", "min_record_length", "loess_span",
                  "reference_yield", "yield_base_year", "precip_durations", "mk_alpha", "seed",
                  "threads", "exclude_unconverged", "density_grid_points"},
                 "config");
  if (auto n = root["covariates"]) {
    if (!n.IsSequence()) config_error("'covariates' must be a list");
    cfg.covariates.clear();
    for (const auto& item : n) cfg.covariates.push_back(covariate_from(item, "covariates"));
  }
  if (auto n = root["atmospheric_covariate"]) {
    cfg.atmospheric_covariate = covariate_from(n, "atmospheric_covariate");
  }
  if (auto n = root["prior_mode"]) {
    const auto s = scalar<std::string>(n, "prior_mode");
    const auto m = parse_prior_mode(s);
    if (!m) config_error("prior_mode must be informative or flat");
    cfg.prior_mode = *m;
  }
  if (auto n = root["priors"]) {
    if (!n.IsMap()) config_error("'priors' must be a mapping");
    for (const auto& kv : n) {
      const auto name = kv.first.as<std::string>();
      const auto kind = parse_covariate_kind(name);
      if (!kind) config_error("unknown covariate '" + name + "' in priors");
      cfg.priors[*kind] = prior_from(kv.second, "priors." + name);
    }
  }
  std::optional<std::uint64_t> sampler_seed;
  if (auto n = root["sampler"]) apply_sampler(n, cfg, sampler_seed);
  if (auto n = root["waic_threshold"]) cfg.waic_threshold = scalar<double>(n, "waic_threshold");
  if (auto n = root["start_year"]) cfg.start_year = scalar<int>(n, "start_year");
  if (auto n = root["min_record_length"]) cfg.min_record_length = scalar<int>(n, "min_record_length");
  if (auto n = root["loess_span"]) cfg.loess_span = scalar<int>(n, "loess_span");
  if (auto n = root["reference_yield"]) cfg.reference_yield = scalar<double>(n, "reference_yield");
  if (auto n = root["yield_base_year"]) cfg.yield_base_year = scalar<int>(n, "yield_base_year");
  if (auto n = root["precip_durations"]) {
    if (!n.IsSequence()) config_error("'precip_durations' must be a list");
    cfg.precip_durations.clear();
    for (const auto& item : n) cfg.precip_durations.push_back(scalar<int>(item, "precip_durations"));
  }
  if (auto n = root["mk_alpha"]) cfg.mk_alpha = scalar<double>(n, "mk_alpha");
  std::optional<std::uint64_t> top_seed;
  if (auto n = root["seed"]) top_seed = scalar<std::uint64_t>(n, "seed");
  if (top_seed && sampler_seed && *top_seed != *sampler_seed) {
    config_error("'seed' and 'sampler.seed' disagree");
  }
  if (top_seed) cfg.seed = *top_seed;
  if (sampler_seed) cfg.seed = *sampler_seed;
  cfg.sampler.seed = cfg.seed;
  if (auto n = root["threads"]) cfg.threads = scalar<int>(n, "threads");
  if (auto n = root["exclude_unconverged"]) {
    cfg.exclude_unconverged = scalar<bool>(n, "exclude_unconverged");
  }
  if (auto n = root["density_grid_points"]) {
    cfg.density_grid_points = scalar<int>(n, "density_grid_points");
  }
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace floodattr
