#include <chrono>
#include <numeric>
#include <random>

#include "doctest.h"
#include "floodattr/covariates.hpp"
#include "floodattr/error.hpp"
#include "oracles.hpp"

using namespace floodattr;
using namespace std::chrono;

namespace {

int days_in(int y) { return year{y}.is_leap() ? 366 : 365; }

DailySeries constant_days(int first, int last, double v) {
  DailySeries d{year{first} / January / 1, {}};
  for (int y = first; y <= last; ++y) d.values.insert(d.values.end(), days_in(y), v);
  return d;
}

DailySeries random_days(int first, int last, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> g(0.4, 8.0);
  std::bernoulli_distribution wet(0.45);
  DailySeries d{year{first} / January / 1, {}};
  for (int y = first; y <= last; ++y)
    for (int k = 0; k < days_in(y); ++k) d.values.push_back(wet(rng) ? g(rng) : 0.0);
  return d;
}

// maximum window sum inside each year, brute force
std::vector<double> brute_max(const DailySeries& d, int first, int last, int dur) {
  std::vector<double> out;
  std::size_t off = 0;
  for (int y = first; y <= last; ++y) {
    const int n = days_in(y);
    double best = -1.0;
    for (int s = 0; s + dur <= n; ++s) {
      double sum = 0.0;
      for (int k = 0; k < dur; ++k) sum += d.values[off + s + k];
      best = std::max(best, sum);
    }
    out.push_back(best);
    off += static_cast<std::size_t>(n);
  }
  return out;
}

CovariateSeries make_series(std::vector<double> v, int first = 1961) {
  CovariateSeries s;
  s.kind = CovariateKind::MaxP1;
  for (std::size_t i = 0; i < v.size(); ++i) s.years.push_back(first + static_cast<int>(i));
  s.values = std::move(v);
  return s;
}

}  // namespace

TEST_SUITE("covariates") {
  TEST_CASE("names round trip") {
    for (auto k : kAllCovariateKinds) CHECK(parse_covariate_kind(to_string(k)) == k);
    CHECK_FALSE(parse_covariate_kind("MaxP2").has_value());
    CHECK(precipitation_duration(CovariateKind::MaxP7) == 7);
    CHECK_FALSE(precipitation_duration(CovariateKind::AnnualTotalP).has_value());
    CHECK(is_precipitation(CovariateKind::AnnualTotalP));
    CHECK_FALSE(is_precipitation(CovariateKind::ReservoirIndex));
  }

  TEST_CASE("constant precipitation") {
    const auto d = constant_days(1999, 2001, 2.0);
    const auto m7 = annual_max_precip(d, 7);
    REQUIRE(m7.size() == 3);
    for (double v : m7.values) CHECK(v == doctest::Approx(14.0));
    const auto tot = annual_total_precip(d);
    CHECK(tot.years == std::vector<int>{1999, 2000, 2001});
    CHECK(tot.values[0] == doctest::Approx(730.0));
    CHECK(tot.values[1] == doctest::Approx(732.0));  // 2000 is a leap year
    CHECK(tot.values[2] == doctest::Approx(730.0));
  }

  TEST_CASE("single spike is isolated") {
    auto d = constant_days(1970, 1970, 0.0);
    d.values[200] = 50.0;
    CHECK(annual_max_precip(d, 1).values[0] == 50.0);
    CHECK(annual_max_precip(d, 30).values[0] == 50.0);
  }

  TEST_CASE("storm clusters match exhaustive window scan") {
    auto d = constant_days(1985, 1985, 0.5);
    for (int k = 100; k < 106; ++k) d.values[k] = 20.0 + k % 3;
    for (int k = 103; k < 112; ++k) d.values[k] += 11.0;
    const auto ref = brute_max(d, 1985, 1985, 7);
    CHECK(annual_max_precip(d, 7).values[0] == doctest::Approx(ref[0]).epsilon(1e-13));
  }

  TEST_CASE("property: random years against the brute force scan and ordering") {
    const auto d = random_days(1988, 1996, 42);
    const auto tot = annual_total_precip(d);
    std::vector<std::vector<double>> by_dur;
    for (int dur : {1, 7, 30}) {
      const auto got = annual_max_precip(d, dur);
      const auto ref = brute_max(d, 1988, 1996, dur);
      REQUIRE(got.size() == ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(got.values[i] == doctest::Approx(ref[i]).epsilon(1e-12));
      by_dur.push_back(got.values);
    }
    std::size_t off = 0;
    for (std::size_t i = 0; i < tot.size(); ++i) {
      const int n = days_in(1988 + static_cast<int>(i));
      const double sum = std::accumulate(d.values.begin() + static_cast<long>(off),
                                         d.values.begin() + static_cast<long>(off) + n, 0.0);
      off += static_cast<std::size_t>(n);
      CHECK(tot.values[i] == doctest::Approx(sum).epsilon(1e-12));
      CHECK(by_dur[0][i] <= by_dur[1][i]);
      CHECK(by_dur[1][i] <= by_dur[2][i]);
      CHECK(by_dur[2][i] <= tot.values[i] + 1e-9);
    }
  }

  TEST_CASE("precipitation input errors") {
    CHECK_THROWS_AS((void)annual_max_precip(constant_days(1990, 1990, 1.0), 3), Error);
    const std::array<int, 1> allowed{3};
    CHECK(annual_max_precip(constant_days(1990, 1990, 1.0), 3, allowed).values[0] ==
          doctest::Approx(3.0));
    DailySeries partial{year{1990} / March / 1, std::vector<double>(300, 1.0)};
    CHECK_THROWS_AS((void)annual_total_precip(partial), Error);
    auto short_end = constant_days(1990, 1991, 1.0);
    short_end.values.pop_back();
    CHECK_THROWS_AS((void)annual_total_precip(short_end), Error);
  }

  TEST_CASE("loess: constants are fixed points, length preserved") {
    for (int n : {10, 11, 20, 37}) {
      const auto out = loess_smooth(make_series(std::vector<double>(n, 3.25)));
      REQUIRE(out.size() == static_cast<std::size_t>(n));
      for (double v : out.values) CHECK(v == doctest::Approx(3.25).epsilon(1e-15));
    }
  }

  TEST_CASE("loess: linear series at a symmetric interior point") {
    // span 9 gives a window centred on interior points
    std::vector<double> v;
    for (int i = 0; i < 21; ++i) v.push_back(2.0 + 0.5 * i);
    const auto out = loess_smooth(make_series(v), 9);
    for (int i = 4; i < 17; ++i) CHECK(out.values[i] == doctest::Approx(v[i]).epsilon(1e-13));
  }

  TEST_CASE("loess: 20-point ramp with a step against window enumeration") {
    std::vector<double> v;
    for (int i = 0; i < 20; ++i) v.push_back(10.0 + 0.3 * i + (i >= 12 ? 7.0 : 0.0));
    const auto out = loess_smooth(make_series(v), 10);
    const auto ref = oracle::loess0(v, 10);
    REQUIRE(out.size() == 20);
    for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(out.values[i] - ref[i]) <= 1e-12);
    CHECK(out.years == make_series(v).years);
  }

  TEST_CASE("property: loess is bounded by the input range") {
    std::mt19937_64 rng(3);
    std::lognormal_distribution<double> ln(3.0, 0.6);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> v(10 + rep);
      for (auto& x : v) x = ln(rng);
      const auto out = loess_smooth(make_series(v));
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      const auto ref = oracle::loess0(v, 10);
      for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(out.values[i] >= *lo);
        CHECK(out.values[i] <= *hi);
        CHECK(std::abs(out.values[i] - ref[i]) <= 1e-12 * *hi);
      }
    }
  }

  TEST_CASE("loess rejects short series") {
    CHECK_THROWS_AS((void)loess_smooth(make_series({1, 2, 3}), 10), Error);
    CHECK_THROWS_AS((void)loess_smooth(make_series(std::vector<double>(12, 1.0)), 0), Error);
  }

  TEST_CASE("land-use intensity") {
    const std::vector<CropCell> one{{100.0, 8.72, 0.0}};
    CHECK(land_use_intensity(one, 100.0, 8.72, 2000) == doctest::Approx(1.0));
    const std::vector<CropCell> none{{0.0, 8.72, 0.1}};
    CHECK(land_use_intensity(none, 50.0, 8.72, 1975) == 0.0);
    CHECK(land_use_intensity({}, 50.0, 8.72, 1975) == 0.0);
    const std::vector<CropCell> two{{30.0, 4.36, 0.0}, {20.0, 8.72, 0.0}};
    const double oracle_sum = 30.0 / 100.0 * (4.36 / 8.72) + 20.0 / 100.0 * (8.72 / 8.72);
    CHECK(land_use_intensity(two, 100.0, 8.72, 1990) == doctest::Approx(oracle_sum).epsilon(1e-15));
    CHECK(land_use_intensity(two, 100.0, 8.72, 1990) == doctest::Approx(0.35).epsilon(1e-12));
    CHECK_THROWS_AS((void)land_use_intensity(two, 0.0, 8.72, 1990), Error);
    CHECK_THROWS_AS((void)land_use_intensity(two, 100.0, 0.0, 1990), Error);
  }

  TEST_CASE("land-use intensity: affine in year and clamped below zero") {
    const std::vector<CropCell> cells{{40.0, 6.0, 0.09}, {10.0, 2.0, 0.05}};
    const auto li = [&](int y) { return land_use_intensity(cells, 200.0, 8.72, y); };
    // 2.0 - 0.05 * 40 = 0: the second cell stays unclamped through 1960
    for (int y = 1961; y < 2015; ++y)
      CHECK(li(y + 1) - li(y) == doctest::Approx(li(1991) - li(1990)).epsilon(1e-10));
    const std::vector<CropCell> neg{{10.0, 1.0, 0.1}};
    CHECK(land_use_intensity(neg, 10.0, 8.72, 1980) == 0.0);  // 1 - 2 < 0
    const std::array<int, 3> years{1961, 1962, 1963};
    const auto s = land_use_intensity_series(cells, 200.0, 8.72, years);
    CHECK(s.kind == CovariateKind::LandUseIntensity);
    CHECK(s.values[1] == li(1962));
  }

  TEST_CASE("reservoir index") {
    CHECK(reservoir_index({}, 2000, 100.0, 50.0) == 0.0);
    const std::vector<ReservoirRecord> traun{{1969, 514.0, 1395.0}};
    CHECK(reservoir_index(traun, 1968, 3426.0, 4137.0) == 0.0);
    const double expect = (1395.0 / 3426.0) * (514.0 / 4137.0);
    CHECK(reservoir_index(traun, 1969, 3426.0, 4137.0) == doctest::Approx(expect).epsilon(1e-15));
    CHECK(std::abs(reservoir_index(traun, 2010, 3426.0, 4137.0) - 0.0506) <= 0.0005);
    const std::vector<ReservoirRecord> full{{1950, 300.0, 800.0}};
    CHECK(reservoir_index(full, 1960, 800.0, 300.0) == doctest::Approx(1.0));
    const std::vector<ReservoirRecord> too_big{{1950, 300.0, 900.0}};
    CHECK_THROWS_AS((void)reservoir_index(too_big, 1960, 800.0, 300.0), Error);
    CHECK_THROWS_AS((void)reservoir_index(traun, 1970, 0.0, 10.0), Error);
    CHECK_THROWS_AS((void)reservoir_index(traun, 1970, 10.0, 0.0), Error);
  }

  TEST_CASE("property: reservoir index is a step function with jumps at construction") {
    const std::vector<ReservoirRecord> rs{{1972, 20.0, 100.0}, {1985, 5.0, 40.0}, {1985, 8.0, 60.0},
                                          {2001, 30.0, 250.0}};
    std::vector<int> years(60);
    std::iota(years.begin(), years.end(), 1961);
    const auto s = reservoir_index_series(rs, years, 400.0, 250.0);
    CHECK(s.kind == CovariateKind::ReservoirIndex);
    for (std::size_t i = 1; i < years.size(); ++i) {
      const bool jump = years[i] == 1972 || years[i] == 1985 || years[i] == 2001;
      CHECK(s.values[i] >= s.values[i - 1]);
      CHECK((s.values[i] > s.values[i - 1]) == jump);
    }
  }

  TEST_CASE("builders are deterministic") {
    const auto d = random_days(1990, 1999, 9);
    const auto a = loess_smooth(annual_max_precip(d, 30));
    const auto b = loess_smooth(annual_max_precip(d, 30));
    CHECK(a.values == b.values);
    CHECK(a.at_year(1995) == a.values[5]);
    CHECK_FALSE(a.at_year(2005).has_value());
  }
}
