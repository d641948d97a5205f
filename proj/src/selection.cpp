#include "floodattr/selection.hpp"

#include <cmath>
#include <string>

#include "floodattr/error.hpp"

namespace floodattr {

WaicReport WaicReport::from_value(double waic) {
  WaicReport r;
  r.waic = waic;
  return r;
}

WaicAccumulator::WaicAccumulator(std::size_t observations)
    : max_(observations, kNegInf),
      scaled_sum_(observations, 0.0),
      mean_(observations, 0.0),
      m2_(observations, 0.0) {
  if (observations == 0) fail(ErrorCode::InvalidArgument, "WAIC needs at least one observation");
}

void WaicAccumulator::add_draw(std::span<const double> loglik) {
  if (loglik.size() != max_.size()) {
    fail(ErrorCode::InvalidArgument, "draw has the wrong number of pointwise values");
  }
  ++draws_;
  const auto k = static_cast<double>(draws_);
  for (std::size_t i = 0; i < loglik.size(); ++i) {
    const double l = loglik[i];
    if (std::isnan(l)) fail(ErrorCode::Domain, "NaN pointwise log-likelihood");
    if (l > max_[i]) {
      scaled_sum_[i] = scaled_sum_[i] * std::exp(max_[i] - l) + 1.0;
      max_[i] = l;
    } else {
      scaled_sum_[i] += std::exp(l - max_[i]);
    }
    const double delta = l - mean_[i];
    mean_[i] += delta / k;
    m2_[i] += delta * (l - mean_[i]);
  }
}

WaicReport WaicAccumulator::finish() const {
  if (draws_ < 2) fail(ErrorCode::InvalidArgument, "WAIC needs at least 2 draws");
  WaicReport r;
  const auto n = max_.size();
  const auto s = static_cast<double>(draws_);
  r.pointwise_lppd.resize(n);
  r.pointwise_p_waic.resize(n);
  std::vector<double> elementwise(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.pointwise_lppd[i] = max_[i] + std::log(scaled_sum_[i] / s);
    r.pointwise_p_waic[i] = m2_[i] / (s - 1.0);
    r.lppd += r.pointwise_lppd[i];
    r.p_waic += r.pointwise_p_waic[i];
    elementwise[i] = -2.0 * (r.pointwise_lppd[i] - r.pointwise_p_waic[i]);
  }
  r.waic = -2.0 * (r.lppd - r.p_waic);
  if (n > 1) {
    double mean = 0.0;
    for (double e : elementwise) mean += e;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double e : elementwise) var += (e - mean) * (e - mean);
    var /= static_cast<double>(n - 1);
    r.se = std::sqrt(static_cast<double>(n) * var);
  }
  return r;
}

WaicReport waic_from_loglik(std::span<const double> loglik, std::size_t draws,
                            std::size_t observations) {
  if (loglik.size() != draws * observations) {
    fail(ErrorCode::InvalidArgument, "log-likelihood matrix has the wrong size");
  }
  WaicAccumulator acc(observations);
  for (std::size_t s = 0; s < draws; ++s) acc.add_draw(loglik.subspan(s * observations, observations));
  return acc.finish();
}

WaicReport waic(const PosteriorDraws& draws, const FitProblem& prob) {
  if (draws.total_draws() < 2) fail(ErrorCode::InvalidArgument, "WAIC needs at least 2 draws");
  WaicAccumulator acc(prob.size());
  std::vector<double> row(prob.size());
  for (const auto& chain : draws.chains) {
    for (const auto& theta : chain) {
      pointwise_log_likelihood(theta, prob, row);
      acc.add_draw(row);
    }
  }
  return acc.finish();
}

std::string_view to_string(Driver d) noexcept {
  switch (d) {
    case Driver::Atmospheric:
      return "Atmospheric";
    case Driver::Catchment:
      return "Catchment";
    case Driver::RiverSystem:
      return "RiverSystem";
  }
  return "?";
}

std::string_view to_string(Selection s) noexcept {
  switch (s) {
    case Selection::TimeInvariant:
      return "TimeInvariant";
    case Selection::Atmospheric:
      return "Atmospheric";
    case Selection::Catchment:
      return "Catchment";
    case Selection::RiverSystem:
      return "RiverSystem";
  }
  return "?";
}

std::optional<Selection> parse_selection(std::string_view name) noexcept {
  for (auto s : {Selection::TimeInvariant, Selection::Atmospheric, Selection::Catchment,
                 Selection::RiverSystem}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

Selection selection_of(Driver d) noexcept {
  switch (d) {
    case Driver::Atmospheric:
      return Selection::Atmospheric;
    case Driver::Catchment:
      return Selection::Catchment;
    case Driver::RiverSystem:
      return Selection::RiverSystem;
  }
  return Selection::TimeInvariant;
}

AttributionDecision attribute(double g0_waic, const std::map<Driver, double>& candidates,
                              double threshold) {
  if (candidates.empty()) fail(ErrorCode::InvalidArgument, "attribution needs a candidate model");
  if (std::isnan(g0_waic)) fail(ErrorCode::Domain, "WAIC of the time-invariant model is NaN");
  if (std::isnan(threshold)) fail(ErrorCode::InvalidArgument, "WAIC threshold is NaN");
  AttributionDecision d;
  d.g0_waic = g0_waic;
  d.candidate_waic = candidates;
  // std::map iterates in enum order, which is the tie-break precedence.
  for (const auto& [driver, w] : candidates) {
    if (std::isnan(w)) {
      fail(ErrorCode::Domain, "WAIC of the " + std::string(to_string(driver)) + " model is NaN");
    }
    if (!d.best_candidate || w < candidates.at(*d.best_candidate)) d.best_candidate = driver;
  }
  const double best = candidates.at(*d.best_candidate);
  d.margin = g0_waic - best;
  d.selected = best < g0_waic - threshold ? selection_of(*d.best_candidate)
                                          : Selection::TimeInvariant;
  return d;
}

AttributionDecision attribute(const WaicReport& g0, const std::map<Driver, WaicReport>& candidates,
                              double threshold) {
  std::map<Driver, double> values;
  for (const auto& [driver, r] : candidates) values.emplace(driver, r.waic);
  return attribute(g0.waic, values, threshold);
}

}  // namespace floodattr
