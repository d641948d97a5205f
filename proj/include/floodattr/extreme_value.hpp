#pragma once

// Gumbel distribution, covariate links for the location parameter and the
// slope priors used by the driver-informed models.

#include <cmath>
#include <limits>

namespace floodattr {

class GumbelParams {
 public:
  // Throws Error(Domain) unless sigma > 0 and both values are finite.
  GumbelParams(double mu, double sigma);

  [[nodiscard]] double mu() const noexcept { return mu_; }
  [[nodiscard]] double sigma() const noexcept { return sigma_; }

 private:
  double mu_;
  double sigma_;
};

[[nodiscard]] double gumbel_cdf(double z, const GumbelParams& p) noexcept;
[[nodiscard]] double gumbel_logpdf(double z, const GumbelParams& p) noexcept;
// prob must lie in the open interval (0, 1).
[[nodiscard]] double gumbel_quantile(double prob, const GumbelParams& p);

enum class LinkForm {
  TimeInvariant,  // mu = exp(a)
  LogLog,         // log mu = a + b log x
  LogLinear,      // log mu = a + b x
};

struct LinkModel {
  LinkForm form = LinkForm::TimeInvariant;
  double a = 0.0;  // natural log of the discharge unit
  double b = 0.0;  // ignored for TimeInvariant
};

// Transformed covariate entering the linear predictor: log x, x, or 0.
[[nodiscard]] double link_feature(LinkForm form, double x);
[[nodiscard]] double link_mu(const LinkModel& m, double x);

enum class PriorKind { Flat, TruncatedNormal };
enum class Truncation { None, LowerAtZero, UpperAtZero };

struct SlopePrior {
  PriorKind kind = PriorKind::Flat;
  double mean = 0.0;
  double sd = 1.0;
  Truncation truncation = Truncation::None;

  static SlopePrior flat() { return {}; }
  // Throws Error(Domain) for sd <= 0.
  static SlopePrior truncated_normal(double mean, double sd, Truncation t);

  [[nodiscard]] bool is_proper() const noexcept { return kind != PriorKind::Flat; }
  [[nodiscard]] bool in_support(double b) const noexcept;
};

// Natural log of the normal mass retained by the truncation.
[[nodiscard]] double log_retained_mass(const SlopePrior& prior);
[[nodiscard]] double slope_prior_logpdf(double b, const SlopePrior& prior);
// d/db of slope_prior_logpdf, valid inside the support.
[[nodiscard]] double slope_prior_score(double b, const SlopePrior& prior) noexcept;

// Standard normal helpers shared by several modules.
[[nodiscard]] double normal_cdf(double x) noexcept;
[[nodiscard]] double normal_quantile(double p);

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace floodattr
