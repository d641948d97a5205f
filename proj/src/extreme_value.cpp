#include "floodattr/extreme_value.hpp"

#include <boost/math/distributions/normal.hpp>
#include <numbers>
#include <string>

#include "floodattr/error.hpp"

namespace floodattr {

GumbelParams::GumbelParams(double mu, double sigma) : mu_(mu), sigma_(sigma) {
  if (!std::isfinite(mu) || !std::isfinite(sigma) || !(sigma > 0.0)) {
    fail(ErrorCode::Domain, "Gumbel parameters require finite mu and sigma > 0 (mu=" +
                                std::to_string(mu) + ", sigma=" + std::to_string(sigma) + ")");
  }
}

double gumbel_cdf(double z, const GumbelParams& p) noexcept {
  const double u = (z - p.mu()) / p.sigma();
  return std::exp(-std::exp(-u));
}

double gumbel_logpdf(double z, const GumbelParams& p) noexcept {
  const double u = (z - p.mu()) / p.sigma();
  return -std::log(p.sigma()) - u - std::exp(-u);
}

double gumbel_quantile(double prob, const GumbelParams& p) {
  if (!(prob > 0.0 && prob < 1.0)) {
    fail(ErrorCode::Domain, "Gumbel quantile requires 0 < prob < 1, got " + std::to_string(prob));
  }
  return p.mu() - p.sigma() * std::log(-std::log(prob));
}

double link_feature(LinkForm form, double x) {
  switch (form) {
    case LinkForm::TimeInvariant:
      return 0.0;
    case LinkForm::LogLog:
      if (!(x > 0.0)) {
        fail(ErrorCode::Domain,
             "log-log link requires a strictly positive covariate, got " + std::to_string(x));
      }
      return std::log(x);
    case LinkForm::LogLinear:
      return x;
  }
  return 0.0;
}

double link_mu(const LinkModel& m, double x) {
  if (m.form == LinkForm::TimeInvariant) return std::exp(m.a);
  return std::exp(m.a + m.b * link_feature(m.form, x));
}

SlopePrior SlopePrior::truncated_normal(double mean, double sd, Truncation t) {
  if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(mean)) {
    fail(ErrorCode::Domain, "slope prior requires finite mean and sd > 0");
  }
  return SlopePrior{PriorKind::TruncatedNormal, mean, sd, t};
}

bool SlopePrior::in_support(double b) const noexcept {
  if (kind == PriorKind::Flat) return std::isfinite(b);
  switch (truncation) {
    case Truncation::None:
      return std::isfinite(b);
    case Truncation::LowerAtZero:
      return b >= 0.0 && std::isfinite(b);
    case Truncation::UpperAtZero:
      return b <= 0.0 && std::isfinite(b);
  }
  return false;
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    fail(ErrorCode::Domain, "normal quantile requires 0 < p < 1, got " + std::to_string(p));
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double log_retained_mass(const SlopePrior& prior) {
  if (prior.kind == PriorKind::Flat) return 0.0;
  double mass = 1.0;
  switch (prior.truncation) {
    case Truncation::None:
      return 0.0;
    case Truncation::LowerAtZero:
      mass = normal_cdf(prior.mean / prior.sd);
      break;
    case Truncation::UpperAtZero:
      mass = normal_cdf(-prior.mean / prior.sd);
      break;
  }
  if (!(mass > 0.0)) fail(ErrorCode::Domain, "truncated prior retains no probability mass");
  return std::log(mass);
}

double slope_prior_logpdf(double b, const SlopePrior& prior) {
  if (prior.kind == PriorKind::Flat) return std::isfinite(b) ? 0.0 : kNegInf;
  if (!prior.in_support(b)) return kNegInf;
  const double z = (b - prior.mean) / prior.sd;
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  return -0.5 * z * z - std::log(prior.sd) - kHalfLog2Pi - log_retained_mass(prior);
}

double slope_prior_score(double b, const SlopePrior& prior) noexcept {
  if (prior.kind == PriorKind::Flat) return 0.0;
  return -(b - prior.mean) / (prior.sd * prior.sd);
}

}  // namespace floodattr
