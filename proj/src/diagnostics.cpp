#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "floodattr/bayes.hpp"
#include "floodattr/error.hpp"

namespace floodattr {

namespace {

using Chains = std::vector<std::vector<double>>;

void check_shape(std::span<const std::vector<double>> chains) {
  if (chains.size() < 2) fail(ErrorCode::InvalidArgument, "diagnostics need at least 2 chains");
  const auto n = chains.front().size();
  if (n < 4) fail(ErrorCode::InvalidArgument, "diagnostics need at least 4 draws per chain");
  for (const auto& c : chains) {
    if (c.size() != n) fail(ErrorCode::InvalidArgument, "chains differ in length");
  }
}

Chains split(std::span<const std::vector<double>> chains) {
  Chains out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    // The middle draw of an odd-length chain is dropped.
    out.emplace_back(c.begin(), c.begin() + static_cast<long>(half));
    out.emplace_back(c.end() - static_cast<long>(half), c.end());
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

bool pooled_zero_variance(const Chains& chains) {
  const double first = chains.front().front();
  for (const auto& c : chains) {
    for (double x : c) {
      if (x != first) return false;
    }
  }
  return true;
}

// Replace every draw by the normal score of its pooled (average) rank.
Chains rank_normalize(const Chains& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (double x : chains[c]) pooled.emplace_back(x, pooled.size());
  }
  const auto total = pooled.size();
  std::vector<double> ranks(total);
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return pooled[i].first < pooled[j].first; });
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j + 1 < total && pooled[order[j + 1]].first == pooled[order[i]].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  Chains out;
  std::size_t idx = 0;
  const double s = static_cast<double>(total);
  for (const auto& c : chains) {
    std::vector<double> z;
    z.reserve(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) {
      z.push_back(normal_quantile((ranks[idx++] - 0.375) / (s + 0.25)));
    }
    out.push_back(std::move(z));
  }
  return out;
}

std::optional<double> basic_rhat(const Chains& chains) {
  const auto n = static_cast<double>(chains.front().size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& c : chains) {
    means.push_back(mean_of(c));
    w += variance_of(c);
  }
  w /= static_cast<double>(chains.size());
  const double b_over_n = variance_of(means);
  if (w == 0.0) {
    if (b_over_n == 0.0) return std::nullopt;
    return std::numeric_limits<double>::infinity();
  }
  const double var_plus = (n - 1.0) / n * w + b_over_n;
  return std::sqrt(var_plus / w);
}

std::vector<double> autocovariance(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::size_t m = 1;
  while (m < 2 * n) m <<= 1;
  const double mean = mean_of(x);
  std::vector<double> padded(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = x[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, padded);
  for (auto& f : freq) f = std::complex<double>(std::norm(f), 0.0);
  std::vector<double> ac;
  fft.inv(ac, freq);
  ac.resize(n);
  for (double& v : ac) v /= static_cast<double>(n);
  return ac;
}

std::optional<double> ess_of(const Chains& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  std::vector<std::vector<double>> acov;
  std::vector<double> means;
  for (const auto& c : chains) {
    acov.push_back(autocovariance(c));
    means.push_back(mean_of(c));
  }
  const double nd = static_cast<double>(n);
  double mean_var = 0.0;
  for (const auto& a : acov) mean_var += a[0] * nd / (nd - 1.0);
  mean_var /= static_cast<double>(m);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += variance_of(means);
  if (!(var_plus > 0.0)) return std::nullopt;

  auto rho = [&](std::size_t t) {
    double s = 0.0;
    for (const auto& a : acov) s += a[t];
    s /= static_cast<double>(m);
    return 1.0 - (mean_var - s) / var_plus;
  };

  // Geyer's initial positive sequence, made monotone, with the improved
  // end-of-sequence term.
  std::vector<double> r(n + 2, 0.0);
  r[0] = 1.0;
  double even = 1.0;
  double odd = n > 1 ? rho(1) : 0.0;
  r[1] = odd;
  std::size_t s = 1;
  while (s + 4 < n && even + odd > 0.0) {
    even = rho(s + 1);
    odd = rho(s + 2);
    if (even + odd >= 0.0) {
      r[s + 1] = even;
      r[s + 2] = odd;
    }
    s += 2;
  }
  const std::size_t max_s = s;
  if (even > 0.0) r[max_s + 1] = even;
  for (std::size_t t = 1; t + 3 <= max_s; t += 2) {
    if (r[t + 1] + r[t + 2] > r[t - 1] + r[t]) {
      r[t + 1] = (r[t - 1] + r[t]) / 2.0;
      r[t + 2] = r[t + 1];
    }
  }
  double tau = -1.0 + r[max_s + 1];
  for (std::size_t k = 0; k < max_s; ++k) tau += 2.0 * r[k];
  const double total = static_cast<double>(m) * nd;
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

}  // namespace

std::optional<double> split_rhat(std::span<const std::vector<double>> chains) {
  check_shape(chains);
  const Chains s = split(chains);
  if (pooled_zero_variance(s)) return std::nullopt;
  const auto bulk = basic_rhat(rank_normalize(s));
  std::vector<double> pooled;
  for (const auto& c : s) pooled.insert(pooled.end(), c.begin(), c.end());
  std::nth_element(pooled.begin(), pooled.begin() + static_cast<long>(pooled.size() / 2),
                   pooled.end());
  const double median = pooled[pooled.size() / 2];
  Chains folded = s;
  for (auto& c : folded) {
    for (double& x : c) x = std::abs(x - median);
  }
  std::optional<double> tail;
  if (!pooled_zero_variance(folded)) tail = basic_rhat(rank_normalize(folded));
  if (!bulk) return tail;
  if (!tail) return bulk;
  return std::max(*bulk, *tail);
}

std::optional<double> ess_bulk(std::span<const std::vector<double>> chains) {
  check_shape(chains);
  const Chains s = split(chains);
  if (pooled_zero_variance(s)) return std::nullopt;
  return ess_of(rank_normalize(s));
}

std::optional<double> ess_tail(std::span<const std::vector<double>> chains) {
  check_shape(chains);
  const Chains s = split(chains);
  if (pooled_zero_variance(s)) return std::nullopt;
  std::vector<double> pooled;
  for (const auto& c : s) pooled.insert(pooled.end(), c.begin(), c.end());
  std::sort(pooled.begin(), pooled.end());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(pooled.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    return lo + 1 < pooled.size() ? pooled[lo] * (1.0 - frac) + pooled[lo + 1] * frac
                                  : pooled[lo];
  };
  std::optional<double> result;
  for (double q : {quantile(0.05), quantile(0.95)}) {
    Chains ind = s;
    for (auto& c : ind) {
      for (double& x : c) x = x <= q ? 1.0 : 0.0;
    }
    if (pooled_zero_variance(ind)) continue;
    const auto e = ess_of(ind);
    if (e) result = result ? std::min(*result, *e) : *e;
  }
  return result;
}

Diagnostics diagnose(const PosteriorDraws& d) {
  if (d.num_chains() < 2) fail(ErrorCode::InvalidArgument, "diagnostics need at least 2 chains");
  Diagnostics out;
  static constexpr const char* kNames[] = {"a", "b", "log_sigma"};
  const std::size_t params[] = {0, 1, 2};
  bool ok = true;
  for (std::size_t p : params) {
    if (p == 1 && d.num_params() == 2) continue;
    std::vector<std::vector<double>> chains;
    for (std::size_t c = 0; c < d.num_chains(); ++c) chains.push_back(d.parameter(c, p));
    ParameterDiagnostics pd;
    pd.name = kNames[p];
    const auto rhat = split_rhat(chains);
    if (!rhat) {
      pd.indeterminate = true;
      ok = false;
    } else {
      pd.rhat = *rhat;
      pd.ess_bulk = ess_bulk(chains).value_or(0.0);
      pd.ess_tail = ess_tail(chains).value_or(0.0);
      ok = ok && *pd.rhat < Diagnostics::kRhatLimit && pd.ess_bulk > Diagnostics::kEssLimit &&
           pd.ess_tail > Diagnostics::kEssLimit;
    }
    out.params.push_back(pd);
  }
  for (const auto& s : d.stats) {
    out.divergences += s.divergences;
    if (s.acceptance_rate < 0.01) out.stuck_chain = true;
  }
  out.converged = ok && !out.stuck_chain;
  return out;
}

}  // namespace floodattr
