#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string_view>

#include "floodattr/error.hpp"
#include "floodattr/pipeline.hpp"

namespace floodattr {

namespace fs = std::filesystem;

namespace {

using std::chrono::sys_days;
using std::chrono::year_month_day;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// One delimiter-separated file with a header row. Blank lines and lines
// starting with '#' are skipped. Columns are looked up by name.
class Table {
 public:
  Table(const fs::path& path, std::vector<std::string> required) : name_(path.filename().string()) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
      ++lineno;
      if (lineno == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
      const auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      if (!have_header) {
        delim_ = detect_delimiter(line);
        const auto cols = split(line, delim_);
        for (std::size_t i = 0; i < cols.size(); ++i) index_.emplace(std::string(cols[i]), i);
        for (const auto& r : required) {
          if (!index_.contains(r)) error(lineno, "missing required column '" + r + "'");
        }
        width_ = cols.size();
        have_header = true;
        continue;
      }
      rows_.push_back({lineno, line});
    }
    if (!have_header) error(0, "file has no header row");
  }

  struct Row {
    int line;
    std::string text;
  };

  [[nodiscard]] const std::vector<Row>& rows() const noexcept { return rows_; }

  // Splits a row, checking the field count against the header.
  [[nodiscard]] std::vector<std::string_view> fields(const Row& r) const {
    auto f = split(r.text, delim_);
    if (f.size() != width_) {
      error(r.line, fmt::format("expected {} fields, found {}", width_, f.size()));
    }
    return f;
  }

  [[nodiscard]] std::string_view get(const std::vector<std::string_view>& f, const Row& r,
                                     const std::string& col) const {
    const auto v = f[index_.at(col)];
    if (v.empty()) error(r.line, "empty value in column '" + col + "'");
    return v;
  }

  [[nodiscard]] double number(const std::vector<std::string_view>& f, const Row& r,
                              const std::string& col) const {
    const auto v = get(f, r, col);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
      error(r.line, "column '" + col + "' is not a finite number: '" + std::string(v) + "'");
    }
    return out;
  }

  [[nodiscard]] int integer(const std::vector<std::string_view>& f, const Row& r,
                            const std::string& col) const {
    const auto v = get(f, r, col);
    int out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      error(r.line, "column '" + col + "' is not an integer: '" + std::string(v) + "'");
    }
    return out;
  }

  [[noreturn]] void error(int line, const std::string& rule) const {
    fail(ErrorCode::Validation, fmt::format("{}:{}: {}", name_, line, rule));
  }

 private:
  static char detect_delimiter(std::string_view header) {
    for (char c : {',', ';', '\t'}) {
      if (header.find(c) != std::string_view::npos) return c;
    }
    return ',';
  }

  std::string name_;
  char delim_ = ',';
  std::size_t width_ = 0;
  std::map<std::string, std::size_t> index_;
  std::vector<Row> rows_;
};

std::string format_date(const year_month_day& d) {
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(d.year()),
                     static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
}

std::optional<year_month_day> parse_date(std::string_view s) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  const std::string buf(s);
  if (s.size() != 10 || std::sscanf(buf.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
    return std::nullopt;
  }
  const year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return ymd;
}

SiteRecord& site_for(std::map<std::string, SiteRecord>& sites, const Table& t,
                     const Table::Row& r, std::string_view id) {
  const auto it = sites.find(std::string(id));
  if (it == sites.end()) t.error(r.line, "unknown site '" + std::string(id) + "'");
  return it->second;
}

void read_annual_max(const Table& t, std::map<std::string, SiteRecord>& sites) {
  std::map<std::string, std::map<int, std::pair<double, int>>> by_site;
  for (const auto& r : t.rows()) {
    const auto f = t.fields(r);
    const auto id = t.get(f, r, "site_id");
    site_for(sites, t, r, id);
    const int year = t.integer(f, r, "year");
    const double q = t.number(f, r, "discharge_m3s");
    if (!(q > 0.0)) {
      t.error(r.line, fmt::format("discharge must be positive, got {} in {}", q, year));
    }
    auto& years = by_site[std::string(id)];
    if (!years.emplace(year, std::pair{q, r.line}).second) {
      t.error(r.line, fmt::format("duplicate year {} for site {}", year, id));
    }
  }
  for (auto& [id, years] : by_site) {
    auto& am = sites.at(id).am;
    int prev = 0;
    for (const auto& [year, value] : years) {
      if (!am.years.empty() && year != prev + 1) {
        t.error(value.second,
                fmt::format("gap in annual maxima for site {}: years {} to {} missing", id,
                            prev + 1, year - 1));
      }
      am.years.push_back(year);
      am.discharge.push_back(value.first);
      prev = year;
    }
  }
}

void read_precipitation(const Table& t, std::map<std::string, SiteRecord>& sites) {
  std::map<std::string, std::map<sys_days, std::pair<double, int>>> by_site;
  for (const auto& r : t.rows()) {
    const auto f = t.fields(r);
    const auto id = t.get(f, r, "site_id");
    site_for(sites, t, r, id);
    const auto ds = t.get(f, r, "date");
    const auto date = parse_date(ds);
    if (!date) t.error(r.line, "invalid ISO-8601 date '" + std::string(ds) + "'");
    const double p = t.number(f, r, "precip_mm");
    if (p < 0.0) t.error(r.line, fmt::format("negative precipitation on {}", ds));
    if (!by_site[std::string(id)].emplace(sys_days{*date}, std::pair{p, r.line}).second) {
      t.error(r.line, fmt::format("duplicate date {} for site {}", ds, id));
    }
  }
  for (auto& [id, days] : by_site) {
    DailySeries d;
    const year_month_day first{days.begin()->first};
    const year_month_day last{days.rbegin()->first};
    if (first.month() != std::chrono::January || first.day() != std::chrono::day{1}) {
      t.error(days.begin()->second.second,
              fmt::format("precipitation for site {} must start on January 1, starts on {}", id,
                          format_date(first)));
    }
    if (last.month() != std::chrono::December || last.day() != std::chrono::day{31}) {
      t.error(days.rbegin()->second.second,
              fmt::format("precipitation for site {} must end on December 31, ends on {}", id,
                          format_date(last)));
    }
    d.start_date = first;
    sys_days expected = days.begin()->first;
    for (const auto& [date, value] : days) {
      if (date != expected) {
        t.error(value.second, fmt::format("missing precipitation for site {} on {}", id,
                                          format_date(year_month_day{expected})));
      }
      d.values.push_back(value.first);
      expected += std::chrono::days{1};
    }
    sites.at(id).precipitation = std::move(d);
  }
}

void read_crops(const Table& t, std::map<std::string, SiteRecord>& sites) {
  std::map<std::string, std::set<std::string>> cells;
  for (const auto& r : t.rows()) {
    const auto f = t.fields(r);
    const auto id = t.get(f, r, "site_id");
    auto& site = site_for(sites, t, r, id);
    const auto cell = std::string(t.get(f, r, "cell_id"));
    if (!cells[std::string(id)].insert(cell).second) {
      t.error(r.line, fmt::format("duplicate cell {} for site {}", cell, id));
    }
    CropCell c;
    c.crop_area = t.number(f, r, "crop_area_km2");
    c.yield_2000 = t.number(f, r, "yield2000_t_ha");
    c.yield_trend = t.number(f, r, "yield_trend_t_ha_yr");
    if (c.crop_area < 0.0) t.error(r.line, "crop area must be >= 0");
    if (c.yield_2000 < 0.0) t.error(r.line, "yield in 2000 must be >= 0");
    site.crops.push_back(c);
  }
  for (auto& [id, site] : sites) {
    double total = 0.0;
    for (const auto& c : site.crops) total += c.crop_area;
    if (total > site.catchment_area * (1.0 + 1e-9)) {
      fail(ErrorCode::Validation,
           fmt::format("{}: crop area {} km2 of site {} exceeds its catchment area {} km2",
                       DataFiles::kCrops, total, id, site.catchment_area));
    }
  }
}

void read_reservoirs(const Table& t, std::map<std::string, SiteRecord>& sites) {
  for (const auto& r : t.rows()) {
    const auto f = t.fields(r);
    const auto id = t.get(f, r, "site_id");
    auto& site = site_for(sites, t, r, id);
    ReservoirRecord res;
    res.year_built = t.integer(f, r, "year_built");
    res.capacity = t.number(f, r, "capacity_1e6m3");
    res.drainage_area = t.number(f, r, "drainage_area_km2");
    if (!(res.capacity > 0.0)) t.error(r.line, "reservoir capacity must be > 0");
    if (!(res.drainage_area > 0.0)) t.error(r.line, "reservoir drainage area must be > 0");
    if (res.drainage_area > site.catchment_area) {
      t.error(r.line, fmt::format("reservoir drainage area {} km2 exceeds catchment area {} km2",
                                  res.drainage_area, site.catchment_area));
    }
    site.reservoirs.push_back(res);
  }
}

void read_flood_dates(const Table& t, std::map<std::string, SiteRecord>& sites) {
  std::map<std::string, std::set<int>> seen;
  for (const auto& r : t.rows()) {
    const auto f = t.fields(r);
    const auto id = t.get(f, r, "site_id");
    auto& site = site_for(sites, t, r, id);
    FloodDate d;
    d.year = t.integer(f, r, "year");
    d.day_of_year = t.integer(f, r, "day_of_year");
    const int len = std::chrono::year{d.year}.is_leap() ? 366 : 365;
    if (d.day_of_year < 1 || d.day_of_year > len) {
      t.error(r.line, fmt::format("day_of_year {} outside 1..{}", d.day_of_year, len));
    }
    if (!seen[std::string(id)].insert(d.year).second) {
      t.error(r.line, fmt::format("duplicate flood date year {} for site {}", d.year, id));
    }
    site.flood_dates.push_back(d);
  }
  for (auto& [id, site] : sites) {
    std::sort(site.flood_dates.begin(), site.flood_dates.end(),
              [](const FloodDate& a, const FloodDate& b) { return a.year < b.year; });
  }
}

}  // namespace

std::vector<SiteRecord> ingest(const fs::path& data_dir, const RunConfig& cfg) {
  if (!fs::is_directory(data_dir)) fail(ErrorCode::Io, "not a directory: " + data_dir.string());
  std::map<std::string, SiteRecord> sites;
  {
    const Table t(data_dir / DataFiles::kSites,
                  {"site_id", "area_km2", "elevation_m", "mean_annual_flow_volume_1e6m3"});
    for (const auto& r : t.rows()) {
      const auto f = t.fields(r);
      SiteRecord s;
      s.site_id = std::string(t.get(f, r, "site_id"));
      s.catchment_area = t.number(f, r, "area_km2");
      s.outlet_elevation = t.number(f, r, "elevation_m");
      s.mean_annual_flow_volume = t.number(f, r, "mean_annual_flow_volume_1e6m3");
      if (!(s.catchment_area > 0.0)) t.error(r.line, "catchment area must be > 0");
      if (!(s.mean_annual_flow_volume > 0.0)) t.error(r.line, "mean annual flow volume must be > 0");
      const auto id = s.site_id;
      if (!sites.emplace(id, std::move(s)).second) t.error(r.line, "duplicate site '" + id + "'");
    }
    if (sites.empty()) t.error(0, "no sites listed");
  }
  read_annual_max(Table(data_dir / DataFiles::kAnnualMax, {"site_id", "year", "discharge_m3s"}),
                  sites);
  for (const auto& [id, s] : sites) {
    if (s.am.empty()) {
      fail(ErrorCode::Validation,
           fmt::format("{}: no annual maxima for site {}", DataFiles::kAnnualMax, id));
    }
  }
  const auto optional_table = [&](const char* name, std::vector<std::string> cols, auto reader) {
    const auto p = data_dir / name;
    if (fs::exists(p)) reader(Table(p, std::move(cols)), sites);
  };
  optional_table(DataFiles::kPrecipitation, {"site_id", "date", "precip_mm"}, read_precipitation);
  optional_table(DataFiles::kCrops,
                 {"site_id", "cell_id", "crop_area_km2", "yield2000_t_ha", "yield_trend_t_ha_yr"},
                 read_crops);
  optional_table(DataFiles::kReservoirs,
                 {"site_id", "year_built", "capacity_1e6m3", "drainage_area_km2"}, read_reservoirs);
  optional_table(DataFiles::kFloodDates, {"site_id", "year", "day_of_year"}, read_flood_dates);

  // Every selected covariate needs a data source; LI and RI fall back to an
  // all-zero series, precipitation has no fallback.
  const bool needs_precip = std::any_of(cfg.covariates.begin(), cfg.covariates.end(),
                                        [](CovariateKind k) { return is_precipitation(k); });
  std::vector<SiteRecord> out;
  out.reserve(sites.size());
  for (auto& [id, s] : sites) {
    if (needs_precip && !s.precipitation) {
      fail(ErrorCode::Validation,
           fmt::format("{}: site {} has no daily precipitation but precipitation covariates are "
                       "selected",
                       DataFiles::kPrecipitation, id));
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_site_data(const std::vector<SiteRecord>& sites, const fs::path& data_dir) {
  std::error_code ec;
  fs::create_directories(data_dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + data_dir.string() + ": " + ec.message());
  const auto open = [&](const char* name) {
    std::ofstream f(data_dir / name, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::Io, "cannot write " + (data_dir / name).string());
    return f;
  };
  auto sorted = sites;
  std::sort(sorted.begin(), sorted.end(),
            [](const SiteRecord& a, const SiteRecord& b) { return a.site_id < b.site_id; });

  auto meta = open(DataFiles::kSites);
  meta << "site_id,area_km2,elevation_m,mean_annual_flow_volume_1e6m3\n";
  auto am = open(DataFiles::kAnnualMax);
  am << "site_id,year,discharge_m3s\n";
  auto precip = open(DataFiles::kPrecipitation);
  precip << "site_id,date,precip_mm\n";
  auto crops = open(DataFiles::kCrops);
  crops << "site_id,cell_id,crop_area_km2,yield2000_t_ha,yield_trend_t_ha_yr\n";
  auto res = open(DataFiles::kReservoirs);
  res << "site_id,year_built,capacity_1e6m3,drainage_area_km2\n";
  auto dates = open(DataFiles::kFloodDates);
  dates << "site_id,year,day_of_year\n";

  for (const auto& s : sorted) {
    meta << fmt::format("{},{},{},{}\n", s.site_id, s.catchment_area, s.outlet_elevation,
                        s.mean_annual_flow_volume);
    for (std::size_t i = 0; i < s.am.size(); ++i) {
      am << fmt::format("{},{},{}\n", s.site_id, s.am.years[i], s.am.discharge[i]);
    }
    if (s.precipitation) {
      const sys_days start{s.precipitation->start_date};
      for (std::size_t i = 0; i < s.precipitation->values.size(); ++i) {
        const year_month_day d{start + std::chrono::days{static_cast<long>(i)}};
        precip << fmt::format("{},{},{}\n", s.site_id, format_date(d), s.precipitation->values[i]);
      }
    }
    for (std::size_t i = 0; i < s.crops.size(); ++i) {
      crops << fmt::format("{},c{},{},{},{}\n", s.site_id, i + 1, s.crops[i].crop_area,
                           s.crops[i].yield_2000, s.crops[i].yield_trend);
    }
    for (const auto& r : s.reservoirs) {
      res << fmt::format("{},{},{},{}\n", s.site_id, r.year_built, r.capacity, r.drainage_area);
    }
    for (const auto& d : s.flood_dates) {
      dates << fmt::format("{},{},{}\n", s.site_id, d.year, d.day_of_year);
    }
  }
  for (auto* f : {&meta, &am, &precip, &crops, &res, &dates}) {
    f->flush();
    if (!*f) fail(ErrorCode::Io, "write failed in " + data_dir.string());
  }
}

}  // namespace floodattr
