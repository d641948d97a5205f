#include <fmt/format.h>

#include <fstream>
#include <limits>
#include <set>

#include "floodattr/error.hpp"
#include "floodattr/pipeline.hpp"
#include "json.hpp"

namespace floodattr {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kResultsFile = "site_results.jsonl";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---- to JSON -------------------------------------------------------------

Json to_json(const ParamSummary& s) {
  return {{"mean", s.mean}, {"sd", s.sd}, {"q025", s.q025}, {"q50", s.q50}, {"q975", s.q975}};
}

Json to_json(const WaicReport& w) {
  return {{"waic", w.waic}, {"lppd", w.lppd}, {"p_waic", w.p_waic}, {"se", w.se}};
}

Json to_json(const DiagnosticsSummary& d) {
  Json j = {{"converged", d.converged}};
  j["max_rhat"] = d.max_rhat ? Json(*d.max_rhat) : Json(nullptr);
  j["min_ess"] = d.min_ess;
  j["divergences"] = d.divergences;
  j["stuck_chain"] = d.stuck_chain;
  j["indeterminate"] = d.indeterminate;
  return j;
}

Json to_json(const ModelFit& f) {
  Json j = {{"model", f.model}};
  j["covariate"] = f.covariate ? Json(std::string(to_string(*f.covariate))) : Json(nullptr);
  j["prior_mode"] = std::string(to_string(f.prior_mode));
  j["waic"] = to_json(f.waic);
  j["a"] = to_json(f.a);
  j["b"] = f.b ? to_json(*f.b) : Json(nullptr);
  j["sigma"] = to_json(f.sigma);
  j["diagnostics"] = to_json(f.diagnostics);
  j["degenerate"] = f.degenerate;
  j["excluded"] = f.excluded;
  Json grid = Json::array();
  for (const auto& [b, d] : f.b_density) grid.push_back({b, d});
  j["b_density"] = std::move(grid);
  return j;
}

Json to_json(const AttributionDecision& d) {
  Json j = {{"selected", std::string(to_string(d.selected))}};
  j["g0_waic"] = d.g0_waic;
  Json c = Json::object();
  for (const auto& [driver, w] : d.candidate_waic) c[std::string(to_string(driver))] = w;
  j["candidates"] = std::move(c);
  j["margin"] = d.margin;
  j["best_candidate"] =
      d.best_candidate ? Json(std::string(to_string(*d.best_candidate))) : Json(nullptr);
  return j;
}

Json to_json(const SiteResult& r) {
  Json j = {{"type", "site"}, {"site_id", r.site_id}};
  j["area_km2"] = r.catchment_area;
  j["elevation_m"] = r.outlet_elevation;
  j["fit_first_year"] = r.fit_first_year;
  j["fit_last_year"] = r.fit_last_year;
  j["fit_observations"] = r.fit_observations;
  j["atmospheric_covariate"] = r.atmospheric_covariate
                                   ? Json(std::string(to_string(*r.atmospheric_covariate)))
                                   : Json(nullptr);
  j["attribution"] = to_json(r.attribution);
  Json by = Json::object();
  for (const auto& [k, d] : r.attribution_by_precip) by[std::string(to_string(k))] = to_json(d);
  j["attribution_by_precip"] = std::move(by);
  Json sweep = Json::object();
  for (const auto& [k, d] : r.precip_sweep) sweep[std::string(to_string(k))] = to_json(d);
  j["precip_sweep"] = std::move(sweep);
  Json fits = Json::array();
  for (const auto& f : r.fits) fits.push_back(to_json(f));
  j["fits"] = std::move(fits);
  if (r.trend) {
    j["trend"] = {{"slope_pct_per_year", r.trend->slope}, {"ci_lo", r.trend->ci_lo},
                  {"ci_hi", r.trend->ci_hi},             {"start_year", r.trend->start_year},
                  {"n", r.trend->n}};
  } else {
    j["trend"] = nullptr;
  }
  if (r.mk) {
    j["mann_kendall"] = {{"s", r.mk->s_statistic},
                         {"variance", r.mk->variance},
                         {"z", r.mk->z},
                         {"significant_upward", r.mk->significant_upward},
                         {"all_tied", r.mk->all_tied}};
  } else {
    j["mann_kendall"] = nullptr;
  }
  if (r.seasonality) {
    j["seasonality"] = {{"mean_day", r.seasonality->mean_day},
                        {"mean_angle", r.seasonality->mean_angle},
                        {"concentration", r.seasonality->concentration},
                        {"n", r.seasonality->n}};
  } else {
    j["seasonality"] = nullptr;
  }
  j["warnings"] = r.warnings;
  return j;
}

// ---- from JSON -----------------------------------------------------------

double num(const Json& j) { return j.is_null() ? kNaN : j.get<double>(); }

ParamSummary param_from(const Json& j) {
  return {num(j.at("mean")), num(j.at("sd")), num(j.at("q025")), num(j.at("q50")),
          num(j.at("q975"))};
}

CovariateKind kind_from(const Json& j) {
  const auto s = j.get<std::string>();
  const auto k = parse_covariate_kind(s);
  if (!k) fail(ErrorCode::Validation, "unknown covariate '" + s + "' in results");
  return *k;
}

Driver driver_from(const std::string& s) {
  for (auto d : {Driver::Atmospheric, Driver::Catchment, Driver::RiverSystem}) {
    if (to_string(d) == s) return d;
  }
  fail(ErrorCode::Validation, "unknown driver '" + s + "' in results");
}

AttributionDecision decision_from(const Json& j) {
  AttributionDecision d;
  const auto sel = parse_selection(j.at("selected").get<std::string>());
  if (!sel) fail(ErrorCode::Validation, "unknown selection in results");
  d.selected = *sel;
  d.g0_waic = num(j.at("g0_waic"));
  for (const auto& [k, v] : j.at("candidates").items()) d.candidate_waic[driver_from(k)] = num(v);
  d.margin = num(j.at("margin"));
  if (!j.at("best_candidate").is_null()) {
    d.best_candidate = driver_from(j.at("best_candidate").get<std::string>());
  }
  return d;
}

ModelFit fit_from(const Json& j) {
  ModelFit f;
  f.model = j.at("model").get<std::string>();
  if (!j.at("covariate").is_null()) f.covariate = kind_from(j.at("covariate"));
  const auto mode = parse_prior_mode(j.at("prior_mode").get<std::string>());
  if (!mode) fail(ErrorCode::Validation, "unknown prior mode in results");
  f.prior_mode = *mode;
  const auto& w = j.at("waic");
  f.waic.waic = num(w.at("waic"));
  f.waic.lppd = num(w.at("lppd"));
  f.waic.p_waic = num(w.at("p_waic"));
  f.waic.se = num(w.at("se"));
  f.a = param_from(j.at("a"));
  if (!j.at("b").is_null()) f.b = param_from(j.at("b"));
  f.sigma = param_from(j.at("sigma"));
  const auto& d = j.at("diagnostics");
  f.diagnostics.converged = d.at("converged").get<bool>();
  if (!d.at("max_rhat").is_null()) f.diagnostics.max_rhat = d.at("max_rhat").get<double>();
  f.diagnostics.min_ess = num(d.at("min_ess"));
  f.diagnostics.divergences = d.at("divergences").get<int>();
  f.diagnostics.stuck_chain = d.at("stuck_chain").get<bool>();
  f.diagnostics.indeterminate = d.at("indeterminate").get<bool>();
  f.degenerate = j.at("degenerate").get<bool>();
  f.excluded = j.at("excluded").get<bool>();
  for (const auto& p : j.at("b_density")) f.b_density.emplace_back(num(p.at(0)), num(p.at(1)));
  return f;
}

SiteResult site_from(const Json& j) {
  SiteResult r;
  r.site_id = j.at("site_id").get<std::string>();
  r.catchment_area = num(j.at("area_km2"));
  r.outlet_elevation = num(j.at("elevation_m"));
  r.fit_first_year = j.at("fit_first_year").get<int>();
  r.fit_last_year = j.at("fit_last_year").get<int>();
  r.fit_observations = j.at("fit_observations").get<int>();
  if (!j.at("atmospheric_covariate").is_null()) {
    r.atmospheric_covariate = kind_from(j.at("atmospheric_covariate"));
  }
  r.attribution = decision_from(j.at("attribution"));
  for (const auto& [k, v] : j.at("attribution_by_precip").items()) {
    r.attribution_by_precip.emplace(kind_from(Json(k)), decision_from(v));
  }
  for (const auto& [k, v] : j.at("precip_sweep").items()) {
    r.precip_sweep.emplace(kind_from(Json(k)), decision_from(v));
  }
  for (const auto& f : j.at("fits")) r.fits.push_back(fit_from(f));
  if (const auto& t = j.at("trend"); !t.is_null()) {
    r.trend = TrendResult{num(t.at("slope_pct_per_year")), num(t.at("ci_lo")), num(t.at("ci_hi")),
                          t.at("start_year").get<int>(), t.at("n").get<int>()};
  }
  if (const auto& m = j.at("mann_kendall"); !m.is_null()) {
    r.mk = MkResult{m.at("s").get<long>(), num(m.at("variance")), num(m.at("z")),
                    m.at("significant_upward").get<bool>(), m.at("all_tied").get<bool>()};
  }
  if (const auto& s = j.at("seasonality"); !s.is_null()) {
    r.seasonality = SeasonalityResult{num(s.at("mean_day")), num(s.at("mean_angle")),
                                      num(s.at("concentration")), s.at("n").get<int>()};
  }
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

// ---- flat files ----------------------------------------------------------

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::Io, "cannot write " + p.string());
  return f;
}

void finish(std::ofstream& f, const fs::path& p) {
  f.flush();
  if (!f) fail(ErrorCode::Io, "write failed for " + p.string());
}

std::string header(std::string_view name) {
  return fmt::format("# schema=floodattr.{} version={}\n", name, kSchemaVersion);
}

// Shortest round-trip formatting; empty for NaN.
std::string fmt_num(double v) { return std::isnan(v) ? std::string() : fmt::format("{}", v); }

std::string mk_label(const SiteResult& r) {
  if (!r.mk) return "unknown";
  return r.mk->significant_upward ? "yes" : "no";
}

void write_occurrence(const RunOutcome& o, const fs::path& p) {
  // comparison -> selection -> MK label -> sites
  std::map<std::string, std::map<Selection, std::map<std::string, int>>> counts;
  std::vector<std::string> order{"primary"};
  std::set<CovariateKind> kinds;
  for (const auto& r : o.results) {
    for (const auto& [k, d] : r.attribution_by_precip) kinds.insert(k);
  }
  for (auto k : kinds) order.emplace_back(to_string(k));
  const std::array selections{Selection::TimeInvariant, Selection::Atmospheric,
                              Selection::Catchment, Selection::RiverSystem};
  for (const auto& c : order) {
    for (auto s : selections) {
      counts[c][s]["yes"] = 0;
      counts[c][s]["no"] = 0;
    }
  }
  for (const auto& r : o.results) {
    const auto mk = mk_label(r);
    ++counts["primary"][r.attribution.selected][mk];
    for (const auto& [k, d] : r.attribution_by_precip) ++counts[std::string(to_string(k))][d.selected][mk];
  }
  auto f = open_out(p);
  f << header("occurrence") << "comparison,selection,mk_significant,sites\n";
  for (const auto& c : order) {
    for (auto s : selections) {
      for (const auto& [mk, n] : counts[c][s]) {
        f << fmt::format("{},{},{},{}\n", c, to_string(s), mk, n);
      }
    }
  }
  finish(f, p);
}

void write_trend_vs_area(const RunOutcome& o, const fs::path& p) {
  auto f = open_out(p);
  f << header("trend_vs_area")
    << "site_id,area_km2,trend_pct_per_year,ci_lo,ci_hi,mk_z,mk_significant,selected\n";
  for (const auto& r : o.results) {
    f << fmt::format("{},{},{},{},{},{},{},{}\n", r.site_id, fmt_num(r.catchment_area),
                     r.trend ? fmt_num(r.trend->slope) : "", r.trend ? fmt_num(r.trend->ci_lo) : "",
                     r.trend ? fmt_num(r.trend->ci_hi) : "", r.mk ? fmt_num(r.mk->z) : "",
                     mk_label(r), to_string(r.attribution.selected));
  }
  finish(f, p);
}

void write_precip_sweep(const RunOutcome& o, const fs::path& p) {
  auto f = open_out(p);
  f << header("precip_sweep") << "site_id,covariate,g0_waic,waic,delta_waic,selected\n";
  for (const auto& r : o.results) {
    for (const auto& [k, d] : r.precip_sweep) {
      f << fmt::format("{},{},{},{},{},{}\n", r.site_id, to_string(k), fmt_num(d.g0_waic),
                       fmt_num(d.candidate_waic.at(Driver::Atmospheric)), fmt_num(d.margin),
                       to_string(d.selected));
    }
  }
  finish(f, p);
}

void write_waic_table(const RunOutcome& o, const fs::path& p) {
  auto f = open_out(p);
  f << header("waic_table")
    << "site_id,model,prior_mode,waic,lppd,p_waic,se,converged,degenerate,excluded,"
       "b_mean,b_q025,b_q975\n";
  for (const auto& r : o.results) {
    for (const auto& m : r.fits) {
      f << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.site_id, m.model,
                       to_string(m.prior_mode), fmt_num(m.waic.waic), fmt_num(m.waic.lppd),
                       fmt_num(m.waic.p_waic), fmt_num(m.waic.se), m.diagnostics.converged,
                       m.degenerate, m.excluded, m.b ? fmt_num(m.b->mean) : "",
                       m.b ? fmt_num(m.b->q025) : "", m.b ? fmt_num(m.b->q975) : "");
    }
  }
  finish(f, p);
}

void write_density(const RunOutcome& o, const fs::path& p) {
  auto f = open_out(p);
  f << header("posterior_b_density") << "site_id,model,b,density\n";
  for (const auto& r : o.results) {
    for (const auto& m : r.fits) {
      for (const auto& [b, d] : m.b_density) {
        f << fmt::format("{},{},{},{}\n", r.site_id, m.model, fmt_num(b), fmt_num(d));
      }
    }
  }
  finish(f, p);
}

void write_seasonality(const RunOutcome& o, const fs::path& p) {
  auto f = open_out(p);
  f << header("seasonality") << "site_id,mean_day,mean_angle_rad,concentration,x,y,n\n";
  for (const auto& r : o.results) {
    if (!r.seasonality) continue;
    const auto& s = *r.seasonality;
    f << fmt::format("{},{},{},{},{},{},{}\n", r.site_id, fmt_num(s.mean_day),
                     fmt_num(s.mean_angle), fmt_num(s.concentration),
                     fmt_num(s.concentration * std::cos(s.mean_angle)),
                     fmt_num(s.concentration * std::sin(s.mean_angle)), s.n);
  }
  finish(f, p);
}

}  // namespace

void write_results_jsonl(const RunOutcome& outcome, const fs::path& file) {
  auto f = open_out(file);
  Json head = {{"schema", "floodattr.site_results"}, {"version", kSchemaVersion}};
  head["sites"] = outcome.results.size();
  head["failures"] = outcome.failures.size();
  f << head.dump() << '\n';
  // Interleave sites and failures in site_id order.
  std::size_t i = 0;
  std::size_t k = 0;
  while (i < outcome.results.size() || k < outcome.failures.size()) {
    const bool take_site =
        k == outcome.failures.size() ||
        (i < outcome.results.size() && outcome.results[i].site_id <= outcome.failures[k].site_id);
    if (take_site) {
      f << to_json(outcome.results[i++]).dump() << '\n';
    } else {
      const auto& fl = outcome.failures[k++];
      f << Json{{"type", "failure"}, {"site_id", fl.site_id}, {"message", fl.message}}.dump()
        << '\n';
    }
  }
  finish(f, file);
}

RunOutcome read_results_jsonl(const fs::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorCode::Io, "cannot open " + file.string());
  RunOutcome out;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto where = fmt::format("{}:{}: ", file.filename().string(), lineno);
    try {
      const auto j = Json::parse(line);
      if (!have_header) {
        if (j.value("schema", "") != "floodattr.site_results") {
          fail(ErrorCode::Validation, "missing schema header");
        }
        if (j.at("version").get<int>() != kSchemaVersion) {
          fail(ErrorCode::Validation, fmt::format("unsupported schema version {}",
                                                  j.at("version").get<int>()));
        }
        have_header = true;
        continue;
      }
      const auto type = j.at("type").get<std::string>();
      if (type == "site") {
        out.results.push_back(site_from(j));
      } else if (type == "failure") {
        out.failures.push_back({j.at("site_id").get<std::string>(), j.at("message").get<std::string>()});
      } else {
        fail(ErrorCode::Validation, "unknown record type '" + type + "'");
      }
    } catch (const Error& e) {
      fail(e.code(), where + e.what());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Validation, where + e.what());
    }
  }
  if (!have_header) fail(ErrorCode::Validation, file.string() + ": empty results file");
  return out;
}

void report(const RunOutcome& outcome, const fs::path& out_dir) {
  if (outcome.results.empty()) {
    fail(ErrorCode::InvalidArgument, "no site results to report");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    fail(ErrorCode::Io, "cannot create output directory " + out_dir.string());
  }
  write_results_jsonl(outcome, out_dir / kResultsFile);
  write_occurrence(outcome, out_dir / "occurrence.csv");
  write_trend_vs_area(outcome, out_dir / "trend_vs_area.csv");
  write_precip_sweep(outcome, out_dir / "precip_sweep.csv");
  write_waic_table(outcome, out_dir / "waic_table.csv");
  write_density(outcome, out_dir / "posterior_b_density.csv");
  write_seasonality(outcome, out_dir / "seasonality.csv");
}

}  // namespace floodattr
