#include <cmath>
#include <string>

#include "floodattr/bayes.hpp"
#include "floodattr/error.hpp"

namespace floodattr {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double normal_logpdf(double x, const NormalPrior& p) {
  const double z = (x - p.mean) / p.sd;
  return -0.5 * z * z - std::log(p.sd) - kHalfLog2Pi;
}

void check_prior(const NormalPrior& p) {
  if (!(p.sd > 0.0) || !std::isfinite(p.mean) || !std::isfinite(p.sd)) {
    fail(ErrorCode::InvalidArgument, "normal prior requires finite mean and sd > 0");
  }
}

}  // namespace

FitProblem::FitProblem(AnnualMaxSeries observations) : obs_(std::move(observations)) {
  validate_observations();
  features_.assign(obs_.size(), 0.0);
}

FitProblem::FitProblem(AnnualMaxSeries observations, CovariateSeries covariate, LinkForm form,
                       SlopePrior prior)
    : obs_(std::move(observations)), cov_(std::move(covariate)), form_(form), prior_(prior) {
  validate_observations();
  if (form_ == LinkForm::TimeInvariant) {
    fail(ErrorCode::InvalidArgument, "a covariate model needs a log-log or log-linear link");
  }
  if (cov_->years.size() != cov_->values.size()) {
    fail(ErrorCode::Validation, "covariate years and values differ in length");
  }
  if (cov_->years != obs_.years) {
    fail(ErrorCode::Validation, "covariate years are not aligned with the observation years");
  }
  features_.reserve(obs_.size());
  for (double x : cov_->values) {
    if (!std::isfinite(x)) fail(ErrorCode::Validation, "covariate contains a non-finite value");
    features_.push_back(link_feature(form_, x));
  }
}

void FitProblem::validate_observations() const {
  if (obs_.years.size() != obs_.discharge.size()) {
    fail(ErrorCode::Validation, "observation years and discharges differ in length");
  }
  if (obs_.empty()) fail(ErrorCode::Validation, "fit problem has no observations");
  for (std::size_t i = 0; i < obs_.size(); ++i) {
    if (!std::isfinite(obs_.discharge[i])) {
      fail(ErrorCode::Validation,
           "non-finite discharge in year " + std::to_string(obs_.years[i]));
    }
  }
}

bool FitProblem::posterior_improper() const noexcept {
  return !a_prior_ || !s_prior_ || (has_slope() && !prior_.is_proper());
}

FitProblem& FitProblem::with_intercept_prior(NormalPrior p) {
  check_prior(p);
  a_prior_ = p;
  return *this;
}

FitProblem& FitProblem::with_log_scale_prior(NormalPrior p) {
  check_prior(p);
  s_prior_ = p;
  return *this;
}

void pointwise_log_likelihood(const ParamVector& theta, const FitProblem& prob,
                              std::span<double> out) {
  if (out.size() != prob.size()) {
    fail(ErrorCode::InvalidArgument, "pointwise output has the wrong length");
  }
  const double sigma = std::exp(theta.log_sigma);
  const double b = prob.has_slope() ? theta.b : 0.0;
  const auto feat = prob.features();
  const auto& z = prob.observations().discharge;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double mu = std::exp(theta.a + b * feat[i]);
    const double u = (z[i] - mu) / sigma;
    out[i] = -theta.log_sigma - u - std::exp(-u);
  }
}

double log_likelihood(const ParamVector& theta, const FitProblem& prob) {
  const double sigma = std::exp(theta.log_sigma);
  const double b = prob.has_slope() ? theta.b : 0.0;
  const auto feat = prob.features();
  const auto& z = prob.observations().discharge;
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double mu = std::exp(theta.a + b * feat[i]);
    const double u = (z[i] - mu) / sigma;
    sum += -u - std::exp(-u);
  }
  sum -= static_cast<double>(z.size()) * theta.log_sigma;
  return std::isnan(sum) ? kNegInf : sum;
}

double log_posterior(const ParamVector& theta, const FitProblem& prob) {
  if (!std::isfinite(theta.a) || !std::isfinite(theta.log_sigma)) return kNegInf;
  double lp = 0.0;
  if (prob.has_slope()) {
    lp += slope_prior_logpdf(theta.b, prob.slope_prior());
    if (lp == kNegInf) return kNegInf;
  }
  if (prob.intercept_prior()) lp += normal_logpdf(theta.a, *prob.intercept_prior());
  if (prob.log_scale_prior()) lp += normal_logpdf(theta.log_sigma, *prob.log_scale_prior());
  return lp + log_likelihood(theta, prob);
}

double log_posterior_and_gradient(const ParamVector& theta, const FitProblem& prob,
                                  Gradient& grad) {
  grad = {0.0, 0.0, 0.0};
  if (!std::isfinite(theta.a) || !std::isfinite(theta.log_sigma)) return kNegInf;
  double lp = 0.0;
  if (prob.has_slope()) {
    lp = slope_prior_logpdf(theta.b, prob.slope_prior());
    if (lp == kNegInf) return kNegInf;
  }
  const double sigma = std::exp(theta.log_sigma);
  const double b = prob.has_slope() ? theta.b : 0.0;
  const auto feat = prob.features();
  const auto& z = prob.observations().discharge;
  Gradient g{0.0, 0.0, 0.0};
  double ll = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double mu = std::exp(theta.a + b * feat[i]);
    const double u = (z[i] - mu) / sigma;
    const double e = std::exp(-u);
    ll += -u - e;
    // d ell / d eta with eta = log mu
    const double d_eta = mu * (1.0 - e) / sigma;
    g[0] += d_eta;
    g[1] += d_eta * feat[i];
    g[2] += u * (1.0 - e);
  }
  const auto n = static_cast<double>(z.size());
  ll -= n * theta.log_sigma;
  g[2] -= n;
  if (prob.has_slope()) {
    g[1] += slope_prior_score(theta.b, prob.slope_prior());
  } else {
    g[1] = 0.0;
  }
  if (prob.intercept_prior()) {
    const auto& p = *prob.intercept_prior();
    lp += normal_logpdf(theta.a, p);
    g[0] -= (theta.a - p.mean) / (p.sd * p.sd);
  }
  if (prob.log_scale_prior()) {
    const auto& p = *prob.log_scale_prior();
    lp += normal_logpdf(theta.log_sigma, p);
    g[2] -= (theta.log_sigma - p.mean) / (p.sd * p.sd);
  }
  const double total = lp + ll;
  if (!std::isfinite(total) || !std::isfinite(g[0]) || !std::isfinite(g[1]) ||
      !std::isfinite(g[2])) {
    return kNegInf;
  }
  grad = g;
  return total;
}

Gradient grad_log_posterior(const ParamVector& theta, const FitProblem& prob) {
  if (prob.has_slope()) {
    const auto& pr = prob.slope_prior();
    const bool interior = pr.kind == PriorKind::Flat || pr.truncation == Truncation::None ||
                          (pr.truncation == Truncation::LowerAtZero && theta.b > 0.0) ||
                          (pr.truncation == Truncation::UpperAtZero && theta.b < 0.0);
    if (!interior || !std::isfinite(theta.b)) {
      fail(ErrorCode::Domain, "gradient requested on or outside the slope prior support");
    }
  }
  Gradient g{};
  if (log_posterior_and_gradient(theta, prob, g) == kNegInf) {
    fail(ErrorCode::Domain, "log posterior is not finite at the requested point");
  }
  return g;
}

}  // namespace floodattr
