#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "floodattr/error.hpp"
#include "floodattr/selection.hpp"

using namespace floodattr;

namespace {

// Six hand-set values, 3 draws x 2 observations. Row = draw.
const std::vector<double> kLoglik{-1.0, -2.0,   //
                                  -1.5, -2.5,   //
                                  -0.5, -3.0};

struct Direct {
  double lppd;
  double p_waic;
};

Direct direct_waic(const std::vector<double>& ll, std::size_t draws, std::size_t obs) {
  Direct d{0.0, 0.0};
  for (std::size_t i = 0; i < obs; ++i) {
    double mean_lik = 0.0;
    double mean = 0.0;
    for (std::size_t s = 0; s < draws; ++s) {
      mean_lik += std::exp(ll[s * obs + i]);
      mean += ll[s * obs + i];
    }
    mean_lik /= static_cast<double>(draws);
    mean /= static_cast<double>(draws);
    double var = 0.0;
    for (std::size_t s = 0; s < draws; ++s) var += std::pow(ll[s * obs + i] - mean, 2);
    d.lppd += std::log(mean_lik);
    d.p_waic += var / static_cast<double>(draws - 1);
  }
  return d;
}

}  // namespace

TEST_SUITE("selection") {
  TEST_CASE("WAIC against direct arithmetic") {
    const auto r = waic_from_loglik(kLoglik, 3, 2);
    // observation 1: mean of e^-1, e^-1.5, e^-0.5; variance of {-1,-1.5,-0.5} is 0.25
    // observation 2: variance of {-2,-2.5,-3} is 0.25
    const double lppd = std::log((std::exp(-1.0) + std::exp(-1.5) + std::exp(-0.5)) / 3.0) +
                        std::log((std::exp(-2.0) + std::exp(-2.5) + std::exp(-3.0)) / 3.0);
    CHECK(std::abs(r.lppd - lppd) <= 1e-12);
    CHECK(std::abs(r.p_waic - 0.5) <= 1e-12);
    CHECK(std::abs(r.waic - (-2.0 * (lppd - 0.5))) <= 1e-12);
    CHECK(r.waic == -2.0 * (r.lppd - r.p_waic));
    REQUIRE(r.pointwise_lppd.size() == 2);
    CHECK(r.pointwise_p_waic[0] == doctest::Approx(0.25));
    CHECK(r.se > 0.0);
  }

  TEST_CASE("identical draws give zero penalty") {
    const std::vector<double> ll{-1.2, -0.7, -1.2, -0.7, -1.2, -0.7, -1.2, -0.7};
    const auto r = waic_from_loglik(ll, 4, 2);
    CHECK(r.p_waic == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(r.waic == doctest::Approx(-2.0 * (-1.2 - 0.7)));
  }

  TEST_CASE("property: additivity, shifts and permutations") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(-3.0, 0.8);
    const std::size_t draws = 200;
    const std::size_t obs = 15;
    std::vector<double> ll(draws * obs);
    for (auto& v : ll) v = n(rng);
    const auto base = waic_from_loglik(ll, draws, obs);
    const auto d = direct_waic(ll, draws, obs);
    CHECK(base.lppd == doctest::Approx(d.lppd).epsilon(1e-12));
    CHECK(base.p_waic == doctest::Approx(d.p_waic).epsilon(1e-12));

    // duplicate every observation
    std::vector<double> twice(draws * obs * 2);
    for (std::size_t s = 0; s < draws; ++s)
      for (std::size_t i = 0; i < obs; ++i) {
        twice[s * 2 * obs + i] = ll[s * obs + i];
        twice[s * 2 * obs + obs + i] = ll[s * obs + i];
      }
    const auto dup = waic_from_loglik(twice, draws, 2 * obs);
    CHECK(dup.lppd == doctest::Approx(2.0 * base.lppd).epsilon(1e-12));
    CHECK(dup.p_waic == doctest::Approx(2.0 * base.p_waic).epsilon(1e-12));

    // constant shift
    auto shifted = ll;
    for (auto& v : shifted) v += 1.75;
    const auto sh = waic_from_loglik(shifted, draws, obs);
    CHECK(sh.lppd == doctest::Approx(base.lppd + 1.75 * obs).epsilon(1e-12));
    CHECK(sh.p_waic == doctest::Approx(base.p_waic).epsilon(1e-10));

    // permute draws and observations
    std::vector<std::size_t> dp(draws), op(obs);
    std::iota(dp.begin(), dp.end(), 0u);
    std::iota(op.begin(), op.end(), 0u);
    std::shuffle(dp.begin(), dp.end(), rng);
    std::shuffle(op.begin(), op.end(), rng);
    std::vector<double> perm(ll.size());
    for (std::size_t s = 0; s < draws; ++s)
      for (std::size_t i = 0; i < obs; ++i) perm[s * obs + i] = ll[dp[s] * obs + op[i]];
    const auto pr = waic_from_loglik(perm, draws, obs);
    CHECK(pr.waic == doctest::Approx(base.waic).epsilon(1e-12));

    // the streaming accumulator agrees with the matrix form
    WaicAccumulator acc(obs);
    for (std::size_t s = 0; s < draws; ++s) acc.add_draw(std::span(ll).subspan(s * obs, obs));
    CHECK(acc.draws() == draws);
    CHECK(acc.finish().waic == doctest::Approx(base.waic).epsilon(1e-12));
  }

  TEST_CASE("WAIC input errors") {
    const std::vector<double> one{-1.0, -2.0};
    CHECK_THROWS_AS((void)waic_from_loglik(one, 1, 2), Error);
    CHECK_THROWS_AS((void)waic_from_loglik(kLoglik, 2, 2), Error);
    std::vector<double> nan = kLoglik;
    nan[3] = std::nan("");
    CHECK_THROWS_AS((void)waic_from_loglik(nan, 3, 2), Error);
    CHECK_THROWS_AS(WaicAccumulator(0), Error);
  }

  TEST_CASE("reference WAIC row") {
    const auto d = attribute(-126.9, {{Driver::Atmospheric, -133.7},
                                      {Driver::Catchment, -127.6},
                                      {Driver::RiverSystem, -126.2}});
    CHECK(d.selected == Selection::Atmospheric);
    CHECK(d.margin == doctest::Approx(6.8).epsilon(1e-12));
    CHECK(d.best_candidate == Driver::Atmospheric);
    CHECK(d.candidate_waic.size() == 3);
  }

  TEST_CASE("threshold rule") {
    const auto d = attribute(-100.0, {{Driver::Atmospheric, -101.5},
                                      {Driver::Catchment, -101.9},
                                      {Driver::RiverSystem, -99.0}});
    CHECK(d.selected == Selection::TimeInvariant);
    CHECK(d.best_candidate == Driver::Catchment);
    CHECK(d.margin == doctest::Approx(1.9));
    // exactly at the threshold is not enough
    CHECK(attribute(-100.0, {{Driver::Catchment, -102.0}}).selected == Selection::TimeInvariant);
    CHECK(attribute(-100.0, {{Driver::Catchment, -102.0}}, 1.0).selected == Selection::Catchment);
    CHECK(attribute(-100.0, {{Driver::RiverSystem, -102.01}}).selected == Selection::RiverSystem);
  }

  TEST_CASE("ties follow the driver precedence") {
    CHECK(attribute(0.0, {{Driver::RiverSystem, -10.0}, {Driver::Catchment, -10.0}}).selected ==
          Selection::Catchment);
    CHECK(attribute(0.0, {{Driver::RiverSystem, -10.0},
                          {Driver::Atmospheric, -10.0},
                          {Driver::Catchment, -10.0}})
              .selected == Selection::Atmospheric);
  }

  TEST_CASE("NaN and empty inputs are errors") {
    CHECK_THROWS_AS((void)attribute(std::nan(""), {{Driver::Catchment, -1.0}}), Error);
    CHECK_THROWS_AS((void)attribute(0.0, {{Driver::Catchment, std::nan("")}}), Error);
    CHECK_THROWS_AS((void)attribute(0.0, std::map<Driver, double>{}), Error);
    const std::map<Driver, WaicReport> reports{{Driver::Atmospheric, WaicReport::from_value(-9.0)}};
    CHECK(attribute(WaicReport::from_value(-5.0), reports).selected == Selection::Atmospheric);
  }

  TEST_CASE("property: improving the winner keeps it selected") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    std::uniform_real_distribution<double> step(0.0, 5.0);
    const Driver drivers[] = {Driver::Atmospheric, Driver::Catchment, Driver::RiverSystem};
    for (int k = 0; k < 2000; ++k) {
      std::map<Driver, double> c;
      for (auto dr : drivers) c[dr] = u(rng);
      const double g0 = u(rng);
      const auto before = attribute(g0, c);
      if (before.selected == Selection::TimeInvariant) continue;
      c[*before.best_candidate] -= step(rng);
      CHECK(attribute(g0, c).selected == before.selected);
      // selected driver always beats G0 by more than the threshold
      CHECK(c[*before.best_candidate] < g0 - 2.0);
    }
  }

  TEST_CASE("selection names") {
    for (auto s : {Selection::TimeInvariant, Selection::Atmospheric, Selection::Catchment,
                   Selection::RiverSystem})
      CHECK(parse_selection(to_string(s)) == s);
    CHECK_FALSE(parse_selection("G0").has_value());
  }
}
