#include <Eigen/Dense>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <random>
#include <string>
#include <thread>

#include "floodattr/bayes.hpp"
#include "floodattr/error.hpp"

namespace floodattr {

namespace {

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using Engine = std::mt19937_64;

constexpr double kEulerGamma = 0.57721566490153286061;
constexpr double kDivergenceThreshold = 1000.0;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Unconstrained coordinates used by the sampler:
//   q = (a, log_sigma)                 time-invariant
//   q = (a + b * center, r, log_sigma) otherwise, b = r or b = +-exp(r)
// Centering the feature removes most of the a/b posterior correlation; the
// shift is linear with unit Jacobian.
class Coordinates {
 public:
  explicit Coordinates(const FitProblem& prob) : prob_(prob) {
    if (prob.has_slope()) {
      dim_ = 3;
      const auto f = prob.features();
      double s = 0.0;
      for (double v : f) s += v;
      center_ = s / static_cast<double>(f.size());
      const auto& pr = prob.slope_prior();
      if (pr.kind == PriorKind::TruncatedNormal) sign_ = truncation_sign(pr.truncation);
    }
  }

  [[nodiscard]] int dim() const { return dim_; }

  [[nodiscard]] ParamVector to_theta(const Vec& q) const {
    if (dim_ == 2) return {q[0], 0.0, q[1]};
    const double b = sign_ == 0 ? q[1] : sign_ * std::exp(q[1]);
    return {q[0] - b * center_, b, q[2]};
  }

  [[nodiscard]] Vec from_theta(const ParamVector& t) const {
    Vec q(dim_);
    if (dim_ == 2) {
      q << t.a, t.log_sigma;
    } else {
      const double r = sign_ == 0 ? t.b : std::log(sign_ * t.b);
      q << t.a + t.b * center_, r, t.log_sigma;
    }
    return q;
  }

  // Log density in q (posterior plus log Jacobian) and its gradient.
  double log_density(const Vec& q, Vec& grad) const {
    grad.setZero(dim_);
    const ParamVector t = to_theta(q);
    if (dim_ == 3 && sign_ != 0 && t.b == 0.0) return kNegInf;  // exp underflow
    Gradient g{};
    const double lp = log_posterior_and_gradient(t, prob_, g);
    if (lp == kNegInf) return kNegInf;
    if (dim_ == 2) {
      grad << g[0], g[2];
      return lp;
    }
    const double db_dr = sign_ == 0 ? 1.0 : t.b;
    const double jac = sign_ == 0 ? 0.0 : q[1];
    grad << g[0], (g[1] - center_ * g[0]) * db_dr + (sign_ == 0 ? 0.0 : 1.0), g[2];
    return lp + jac;
  }

 private:
  static int truncation_sign(Truncation t) {
    switch (t) {
      case Truncation::LowerAtZero:
        return 1;
      case Truncation::UpperAtZero:
        return -1;
      case Truncation::None:
        return 0;
    }
    return 0;
  }

  const FitProblem& prob_;
  int dim_ = 2;
  double center_ = 0.0;
  int sign_ = 0;
};

class DualAveraging {
 public:
  explicit DualAveraging(double delta) : delta_(delta) {}

  void restart(double step) {
    mu_ = std::log(10.0 * step);
    log_step_bar_ = 0.0;
    h_bar_ = 0.0;
    t_ = 0;
  }

  double update(double accept_prob) {
    ++t_;
    const double t = static_cast<double>(t_);
    const double eta = 1.0 / (t + kT0);
    h_bar_ = (1.0 - eta) * h_bar_ + eta * (delta_ - accept_prob);
    const double log_step = mu_ - std::sqrt(t) / kGamma * h_bar_;
    const double w = std::pow(t, -kKappa);
    log_step_bar_ = w * log_step + (1.0 - w) * log_step_bar_;
    return std::exp(log_step);
  }

  [[nodiscard]] double averaged() const { return std::exp(log_step_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double delta_;
  double mu_ = 0.0;
  double log_step_bar_ = 0.0;
  double h_bar_ = 0.0;
  long t_ = 0;
};

// Stan-style warmup windows: a fast initial buffer, doubling slow windows
// in which the metric is estimated, and a fast terminal buffer.
struct WarmupPlan {
  int init_buffer = 0;
  int term_buffer = 0;
  std::vector<int> window_ends;  // exclusive iteration index where each slow window closes
};

WarmupPlan plan_warmup(int warmup) {
  WarmupPlan plan;
  if (warmup < 20) return plan;
  int init = 75;
  int term = 50;
  int base = 25;
  if (warmup < init + term + base) {
    init = warmup * 15 / 100;
    term = warmup / 10;
    base = warmup - init - term;
  }
  plan.init_buffer = init;
  plan.term_buffer = term;
  const int slow_end = warmup - term;
  int start = init;
  int size = base;
  while (start < slow_end) {
    int end = start + size;
    if (end + 2 * size > slow_end) end = slow_end;
    plan.window_ends.push_back(end);
    start = end;
    size *= 2;
  }
  return plan;
}

struct Metric {
  Mat inv_mass;  // posterior covariance estimate
  Mat chol;      // lower Cholesky factor of inv_mass

  explicit Metric(int dim) : inv_mass(Mat::Identity(dim, dim)), chol(Mat::Identity(dim, dim)) {}

  void set(const Mat& cov) {
    inv_mass = cov;
    Eigen::LLT<Mat> llt(inv_mass);
    if (llt.info() != Eigen::Success) {
      inv_mass = Mat(cov.diagonal().asDiagonal());
      llt.compute(inv_mass);
    }
    chol = llt.matrixL();
  }
};

class Chain {
 public:
  Chain(const FitProblem& prob, const SamplerConfig& cfg, std::uint64_t seed)
      : prob_(prob), cfg_(cfg), coords_(prob), engine_(seed), metric_(coords_.dim()) {
    stats_.seed = seed;
  }

  std::vector<ParamVector> run() {
    initialize();
    adapt();
    return draw();
  }

  [[nodiscard]] const ChainStats& stats() const { return stats_; }

 private:
  double uniform() { return boost::random::uniform_01<double>()(engine_); }
  double normal() { return boost::random::normal_distribution<double>()(engine_); }

  // Gumbel method-of-moments start jittered by +-0.5, slope from its prior.
  void initialize() {
    const auto& z = prob_.observations().discharge;
    const auto n = static_cast<double>(z.size());
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : z) var += (v - mean) * (v - mean);
    var = z.size() > 1 ? var / (n - 1.0) : 0.0;
    double sigma0 = std::sqrt(6.0 * var) / std::numbers::pi;
    if (!(sigma0 > 0.0)) sigma0 = std::max(std::abs(mean) * 0.1, 1e-3);
    double mu0 = mean - kEulerGamma * sigma0;
    if (!(mu0 > 0.0)) mu0 = std::max(mean, sigma0);

    double center = 0.0;
    for (double f : prob_.features()) center += f;
    center /= n;

    for (int attempt = 1; attempt <= cfg_.max_init_attempts; ++attempt) {
      ParamVector t;
      if (prob_.has_slope()) {
        t.b = draw_initial_slope(std::ldexp(1.0, -(attempt - 1) / 10));
      }
      t.a = std::log(mu0) - t.b * center + (uniform() - 0.5);
      t.log_sigma = std::log(sigma0) + (uniform() - 0.5);
      if (prob_.has_slope() && !prob_.slope_prior().in_support(t.b)) continue;
      if (prob_.has_slope() && prob_.slope_prior().is_proper() &&
          prob_.slope_prior().truncation != Truncation::None && t.b == 0.0) {
        continue;
      }
      q_ = coords_.from_theta(t);
      logp_ = coords_.log_density(q_, grad_);
      if (std::isfinite(logp_)) {
        stats_.init_attempts = attempt;
        return;
      }
    }
    fail(ErrorCode::Initialization,
         "could not find a finite log posterior after " + std::to_string(cfg_.max_init_attempts) +
             " initialization attempts");
  }

  double draw_initial_slope(double scale) {
    const auto& pr = prob_.slope_prior();
    if (pr.kind == PriorKind::Flat) return scale * normal();
    if (pr.truncation == Truncation::None) return pr.mean + pr.sd * normal();
    const double edge = normal_cdf(-pr.mean / pr.sd);  // normal mass below zero
    const double u = uniform();
    const double p = pr.truncation == Truncation::LowerAtZero ? edge + u * (1.0 - edge) : u * edge;
    const double clamped = std::clamp(p, 1e-300, 1.0 - 1e-16);
    return pr.mean + pr.sd * normal_quantile(clamped);
  }

  Vec draw_momentum() {
    Vec z(coords_.dim());
    for (int i = 0; i < coords_.dim(); ++i) z[i] = normal();
    // p ~ N(0, inv_mass^-1):  solve L^T p = z
    return metric_.chol.transpose().template triangularView<Eigen::Upper>().solve(z);
  }

  double kinetic(const Vec& p) const { return 0.5 * p.dot(metric_.inv_mass * p); }

  struct Transition {
    double accept_prob = 0.0;
    bool accepted = false;
    bool divergent = false;
  };

  Transition transition(double step, int steps) {
    Vec p = draw_momentum();
    const double h0 = -logp_ + kinetic(p);
    Vec q = q_;
    Vec g = grad_;
    double logp = logp_;
    bool divergent = false;
    for (int s = 0; s < steps; ++s) {
      p += 0.5 * step * g;
      q += step * (metric_.inv_mass * p);
      logp = coords_.log_density(q, g);
      if (!std::isfinite(logp)) {
        divergent = true;
        break;
      }
      p += 0.5 * step * g;
    }
    Transition tr;
    double h1 = std::numeric_limits<double>::infinity();
    if (!divergent) h1 = -logp + kinetic(p);
    if (!std::isfinite(h1) || h1 - h0 > kDivergenceThreshold) {
      tr.divergent = true;
      tr.accept_prob = 0.0;
      return tr;
    }
    tr.accept_prob = std::min(1.0, std::exp(h0 - h1));
    if (uniform() < tr.accept_prob) {
      q_ = q;
      grad_ = g;
      logp_ = logp;
      tr.accepted = true;
    }
    return tr;
  }

  // Doubles or halves a single-leapfrog step until the acceptance
  // probability crosses 0.8.
  double reasonable_step(double step) {
    const Vec q0 = q_;
    const Vec g0 = grad_;
    const double lp0 = logp_;
    auto single = [&](double eps) {
      Vec p = draw_momentum();
      const double h0 = -lp0 + kinetic(p);
      Vec g = g0;
      p += 0.5 * eps * g;
      Vec q = q0 + eps * (metric_.inv_mass * p);
      const double lp = coords_.log_density(q, g);
      if (!std::isfinite(lp)) return 0.0;
      p += 0.5 * eps * g;
      const double h = -lp + kinetic(p);
      return std::isfinite(h) ? std::min(1.0, std::exp(h0 - h)) : 0.0;
    };
    double a = single(step);
    const int dir = a > 0.8 ? 1 : -1;
    for (int i = 0; i < 50; ++i) {
      const double next = dir > 0 ? step * 2.0 : step * 0.5;
      if (next < cfg_.step_size_min || next > cfg_.step_size_max) break;
      step = next;
      a = single(step);
      if ((dir > 0 && a <= 0.8) || (dir < 0 && a >= 0.8)) break;
    }
    return clamp_step(step);
  }

  double clamp_step(double step) const {
    return std::clamp(step, cfg_.step_size_min, cfg_.step_size_max);
  }

  void adapt() {
    const int warmup = cfg_.warmup;
    DualAveraging da(cfg_.target_acceptance);
    step_ = reasonable_step(1.0);
    da.restart(step_);
    const WarmupPlan plan = plan_warmup(warmup);
    std::vector<Vec> window;
    std::size_t next_window = 0;
    int window_start = plan.init_buffer;
    int accepted = 0;
    for (int it = 0; it < warmup; ++it) {
      const Transition tr = transition(step_, cfg_.leapfrog_steps);
      accepted += tr.accepted ? 1 : 0;
      step_ = clamp_step(da.update(tr.accept_prob));
      if (next_window < plan.window_ends.size() && it >= window_start) {
        window.push_back(q_);
        if (it + 1 == plan.window_ends[next_window]) {
          update_metric(window);
          window.clear();
          window_start = it + 1;
          ++next_window;
          step_ = reasonable_step(step_);
          da.restart(step_);
        }
      }
    }
    if (warmup > 0 && accepted == 0) {
      fail(ErrorCode::Sampler, "chain rejected every warmup proposal (step size " +
                                   std::to_string(step_) + ")");
    }
    if (warmup > 0) step_ = clamp_step(da.averaged());
    stats_.step_size = step_;
  }

  void update_metric(const std::vector<Vec>& window) {
    const int d = coords_.dim();
    const auto n = static_cast<double>(window.size());
    if (window.size() < 3) return;
    Vec mean = Vec::Zero(d);
    for (const auto& q : window) mean += q;
    mean /= n;
    Mat cov = Mat::Zero(d, d);
    for (const auto& q : window) {
      const Vec c = q - mean;
      cov += c * c.transpose();
    }
    cov /= (n - 1.0);
    // Regularize towards a small multiple of the identity.
    cov = (n / (n + 5.0)) * cov + 1e-3 * (5.0 / (n + 5.0)) * Mat::Identity(d, d);
    metric_.set(cov);
  }

  std::vector<ParamVector> draw() {
    std::vector<ParamVector> out;
    out.reserve(static_cast<std::size_t>(cfg_.iterations));
    int accepted = 0;
    for (int it = 0; it < cfg_.iterations; ++it) {
      // Jitter step size and path length. A fixed length near half a period
      // flips the sign of the state each move, which mixes means well and
      // second moments badly.
      const double step = step_ * (0.8 + 0.4 * uniform());
      const int lo = std::max(1, cfg_.leapfrog_steps / 2);
      const int span = cfg_.leapfrog_steps - lo;
      const int steps = lo + static_cast<int>(uniform() * (2 * span + 1));
      const Transition tr = transition(step, steps);
      accepted += tr.accepted ? 1 : 0;
      stats_.divergences += tr.divergent ? 1 : 0;
      out.push_back(coords_.to_theta(q_));
    }
    stats_.acceptance_rate =
        cfg_.iterations > 0 ? static_cast<double>(accepted) / cfg_.iterations : 0.0;
    return out;
  }

  const FitProblem& prob_;
  const SamplerConfig& cfg_;
  Coordinates coords_;
  Engine engine_;
  Metric metric_;
  ChainStats stats_;
  Vec q_;
  Vec grad_;
  double logp_ = kNegInf;
  double step_ = 1.0;
};

}  // namespace

void validate(const SamplerConfig& cfg) {
  auto bad = [](const std::string& what) { fail(ErrorCode::Config, "sampler: " + what); };
  if (cfg.chains < 1) bad("chains must be >= 1");
  if (cfg.iterations < 1) bad("iterations must be >= 1");
  if (cfg.warmup < 0) bad("warmup must be >= 0");
  if (cfg.leapfrog_steps < 1) bad("leapfrog_steps must be >= 1");
  if (!(cfg.target_acceptance > 0.0 && cfg.target_acceptance < 1.0)) {
    bad("target_acceptance must be in (0, 1)");
  }
  if (!(cfg.step_size_min > 0.0) || !(cfg.step_size_max >= cfg.step_size_min)) {
    bad("step size bounds must satisfy 0 < min <= max");
  }
  if (cfg.max_init_attempts < 1) bad("max_init_attempts must be >= 1");
  if (cfg.threads < 1) bad("threads must be >= 1");
}

std::size_t PosteriorDraws::total_draws() const noexcept {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.size();
  return n;
}

std::vector<double> PosteriorDraws::parameter(std::size_t chain, std::size_t param) const {
  std::vector<double> out;
  out.reserve(chains.at(chain).size());
  for (const auto& t : chains[chain]) {
    out.push_back(param == 0 ? t.a : param == 1 ? t.b : t.log_sigma);
  }
  return out;
}

PosteriorDraws sample(const FitProblem& prob, const SamplerConfig& cfg) {
  validate(cfg);
  if (prob.posterior_improper() && prob.size() < 3) {
    fail(ErrorCode::Validation,
         "flat priors need at least 3 observations for a proper posterior, got " +
             std::to_string(prob.size()));
  }
  const auto nchains = static_cast<std::size_t>(cfg.chains);
  PosteriorDraws out;
  out.form = prob.form();
  out.posterior_improper = prob.posterior_improper();
  out.chains.resize(nchains);
  out.stats.resize(nchains);
  std::vector<std::exception_ptr> errors(nchains);

  auto run_chain = [&](std::size_t c) {
    try {
      Chain chain(prob, cfg, splitmix64(cfg.seed + 0x632be59bd9b4e019ULL * (c + 1)));
      out.chains[c] = chain.run();
      out.stats[c] = chain.stats();
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };

  if (cfg.threads > 1 && nchains > 1) {
    std::vector<std::jthread> workers;
    const auto nthreads = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), nchains);
    for (std::size_t w = 0; w < nthreads; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t c = w; c < nchains; c += nthreads) run_chain(c);
      });
    }
  } else {
    for (std::size_t c = 0; c < nchains; ++c) run_chain(c);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace floodattr
