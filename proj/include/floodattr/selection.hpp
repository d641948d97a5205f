#pragma once

// WAIC from posterior draws and the driver attribution rule.

#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "floodattr/bayes.hpp"

namespace floodattr {

struct WaicReport {
  double lppd = 0.0;
  double p_waic = 0.0;
  double waic = 0.0;  // -2 (lppd - p_waic)
  double se = 0.0;    // standard error of waic from the pointwise terms
  std::vector<double> pointwise_lppd;
  std::vector<double> pointwise_p_waic;

  // Report carrying only a WAIC value, for decisions on externally computed values.
  static WaicReport from_value(double waic);
};

// Streams draws of pointwise log-likelihoods and accumulates the WAIC terms
// per observation (stable log-mean-exp and Welford variance).
class WaicAccumulator {
 public:
  explicit WaicAccumulator(std::size_t observations);
  void add_draw(std::span<const double> loglik);
  [[nodiscard]] std::size_t draws() const noexcept { return draws_; }
  [[nodiscard]] WaicReport finish() const;

 private:
  std::size_t draws_ = 0;
  std::vector<double> max_;
  std::vector<double> scaled_sum_;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

// loglik is row-major, one row of `observations` values per draw.
[[nodiscard]] WaicReport waic_from_loglik(std::span<const double> loglik, std::size_t draws,
                                          std::size_t observations);
[[nodiscard]] WaicReport waic(const PosteriorDraws& draws, const FitProblem& prob);

enum class Driver { Atmospheric, Catchment, RiverSystem };
enum class Selection { TimeInvariant, Atmospheric, Catchment, RiverSystem };

inline constexpr double kDefaultWaicThreshold = 2.0;

[[nodiscard]] std::string_view to_string(Driver d) noexcept;
[[nodiscard]] std::string_view to_string(Selection s) noexcept;
[[nodiscard]] std::optional<Selection> parse_selection(std::string_view name) noexcept;
[[nodiscard]] Selection selection_of(Driver d) noexcept;

struct AttributionDecision {
  Selection selected = Selection::TimeInvariant;
  double g0_waic = 0.0;
  std::map<Driver, double> candidate_waic;
  // WAIC(G0) minus the lowest driver-informed WAIC; positive favours the driver.
  double margin = 0.0;
  std::optional<Driver> best_candidate;
};

// A driver is selected when it has the lowest WAIC among the candidates and
// that WAIC is below WAIC(G0) - threshold. Exact ties resolve in the order
// Atmospheric, Catchment, RiverSystem. NaN inputs are rejected.
[[nodiscard]] AttributionDecision attribute(const WaicReport& g0,
                                            const std::map<Driver, WaicReport>& candidates,
                                            double threshold = kDefaultWaicThreshold);
[[nodiscard]] AttributionDecision attribute(double g0_waic,
                                            const std::map<Driver, double>& candidates,
                                            double threshold = kDefaultWaicThreshold);

}  // namespace floodattr
