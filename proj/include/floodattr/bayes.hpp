#pragma once

// Posterior for the Gumbel models with a covariate-linked location, a
// Hamiltonian Monte Carlo sampler with warmup adaptation, and split-Rhat /
// ESS convergence diagnostics.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "floodattr/covariates.hpp"
#include "floodattr/extreme_value.hpp"
#include "floodattr/series.hpp"

namespace floodattr {

struct NormalPrior {
  double mean = 0.0;
  double sd = 1.0;
};

// Parameters on the model scale. `b` is unused (kept at 0) for the
// time-invariant model, where `a` is ln(mu0).
struct ParamVector {
  double a = 0.0;
  double b = 0.0;
  double log_sigma = 0.0;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

using Gradient = std::array<double, 3>;  // d/da, d/db, d/dlog_sigma

class FitProblem {
 public:
  // Time-invariant model.
  explicit FitProblem(AnnualMaxSeries observations);
  // Driver-informed model. Covariate years must match the observation years
  // one-to-one; form must not be TimeInvariant.
  FitProblem(AnnualMaxSeries observations, CovariateSeries covariate, LinkForm form,
             SlopePrior prior);

  [[nodiscard]] const AnnualMaxSeries& observations() const noexcept { return obs_; }
  [[nodiscard]] const std::optional<CovariateSeries>& covariate() const noexcept { return cov_; }
  [[nodiscard]] LinkForm form() const noexcept { return form_; }
  [[nodiscard]] const SlopePrior& slope_prior() const noexcept { return prior_; }
  [[nodiscard]] bool has_slope() const noexcept { return form_ != LinkForm::TimeInvariant; }
  [[nodiscard]] std::size_t size() const noexcept { return obs_.size(); }
  // Transformed covariate per observation (log x, x, or 0).
  [[nodiscard]] std::span<const double> features() const noexcept { return features_; }
  // True when any parameter carries an improper flat prior.
  [[nodiscard]] bool posterior_improper() const noexcept;

  // Optional proper priors on a and log_sigma; flat when unset.
  FitProblem& with_intercept_prior(NormalPrior p);
  FitProblem& with_log_scale_prior(NormalPrior p);
  [[nodiscard]] const std::optional<NormalPrior>& intercept_prior() const noexcept {
    return a_prior_;
  }
  [[nodiscard]] const std::optional<NormalPrior>& log_scale_prior() const noexcept {
    return s_prior_;
  }

 private:
  void validate_observations() const;

  AnnualMaxSeries obs_;
  std::optional<CovariateSeries> cov_;
  LinkForm form_ = LinkForm::TimeInvariant;
  SlopePrior prior_;
  std::vector<double> features_;
  std::optional<NormalPrior> a_prior_;
  std::optional<NormalPrior> s_prior_;
};

[[nodiscard]] double log_likelihood(const ParamVector& theta, const FitProblem& prob);
// Per-observation log-likelihood; out.size() must equal prob.size().
void pointwise_log_likelihood(const ParamVector& theta, const FitProblem& prob,
                              std::span<double> out);
[[nodiscard]] double log_posterior(const ParamVector& theta, const FitProblem& prob);
// Analytic gradient of log_posterior. Throws Error(Domain) when theta is not
// strictly inside the prior support.
[[nodiscard]] Gradient grad_log_posterior(const ParamVector& theta, const FitProblem& prob);
// Value and gradient in one pass over the data. Returns -inf outside the
// prior support (grad is then left zeroed); on a truncation boundary the
// gradient is the one-sided limit from inside.
double log_posterior_and_gradient(const ParamVector& theta, const FitProblem& prob,
                                  Gradient& grad);

struct SamplerConfig {
  int chains = 4;
  int iterations = 10000;  // post-warmup draws per chain
  int warmup = 1000;
  std::uint64_t seed = 20190101;
  int leapfrog_steps = 6;
  double target_acceptance = 0.8;
  double step_size_min = 1e-6;
  double step_size_max = 4.0;
  int max_init_attempts = 100;
  int threads = 1;  // chains run concurrently when > 1
};

void validate(const SamplerConfig& cfg);

struct ChainStats {
  std::uint64_t seed = 0;
  double acceptance_rate = 0.0;
  double step_size = 0.0;
  int divergences = 0;
  int init_attempts = 0;
};

struct PosteriorDraws {
  LinkForm form = LinkForm::TimeInvariant;
  std::vector<std::vector<ParamVector>> chains;  // chain x iteration, post-warmup
  std::vector<ChainStats> stats;
  bool posterior_improper = false;

  [[nodiscard]] std::size_t num_chains() const noexcept { return chains.size(); }
  [[nodiscard]] std::size_t total_draws() const noexcept;
  [[nodiscard]] std::size_t num_params() const noexcept {
    return form == LinkForm::TimeInvariant ? 2 : 3;
  }
  // Draws of one parameter (0=a, 1=b, 2=log_sigma) for one chain.
  [[nodiscard]] std::vector<double> parameter(std::size_t chain, std::size_t param) const;
};

[[nodiscard]] PosteriorDraws sample(const FitProblem& prob, const SamplerConfig& cfg);

struct ParameterDiagnostics {
  std::string name;
  std::optional<double> rhat;  // empty when indeterminate
  double ess_bulk = 0.0;
  double ess_tail = 0.0;
  bool indeterminate = false;  // zero pooled variance
};

struct Diagnostics {
  std::vector<ParameterDiagnostics> params;
  int divergences = 0;
  bool stuck_chain = false;  // some chain accepted (almost) nothing
  bool converged = false;    // all R-hat < 1.01, all ESS > 400, no indeterminate parameter

  static constexpr double kRhatLimit = 1.01;
  static constexpr double kEssLimit = 400.0;
};

// Rank-normalized split R-hat (max of bulk and folded) for a set of chains.
// Returns nullopt when the pooled draws have zero variance.
[[nodiscard]] std::optional<double> split_rhat(std::span<const std::vector<double>> chains);
[[nodiscard]] std::optional<double> ess_bulk(std::span<const std::vector<double>> chains);
[[nodiscard]] std::optional<double> ess_tail(std::span<const std::vector<double>> chains);

[[nodiscard]] Diagnostics diagnose(const PosteriorDraws& d);

}  // namespace floodattr
