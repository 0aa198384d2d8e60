#include "wbi/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wbi/error.hpp"

namespace wbi {

double ess_weights(std::span<const double> weights) {
  double s = 0.0, s2 = 0.0;
  for (double w : weights)
    if (std::isfinite(w) && w > 0.0) {
      s += w;
      s2 += w * w;
    }
  if (!(s > 0.0)) throw NumericError("all importance weights are zero or non-finite");
  return s * s / s2;
}

double ess_log_weights(std::span<const double> log_weights) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights)
    if (std::isfinite(lw)) hi = std::max(hi, lw);
  if (!std::isfinite(hi)) throw NumericError("all importance weights are zero or non-finite");
  std::vector<double> w(log_weights.size());
  for (std::size_t j = 0; j < w.size(); ++j)
    w[j] = std::isfinite(log_weights[j]) ? std::exp(log_weights[j] - hi) : 0.0;
  return ess_weights(w);
}

double ess_chain(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 4) throw NumericError("chain too short for ESS");
  const double mean = std::accumulate(chain.begin(), chain.end(), 0.0) / static_cast<double>(n);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = chain[i] - mean;
  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += c[i] * c[i + lag];
    return acc / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return static_cast<double>(n);

  // Pairs Gamma_k = rho_2k + rho_2k+1 are summed while positive and kept
  // non-increasing.
  double tau = -1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double gamma = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (gamma <= 0.0) break;
    gamma = std::min(gamma, prev);
    tau += 2.0 * gamma;
    prev = gamma;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(n)));
  return static_cast<double>(n) / tau;
}

double ess_chains(const std::vector<std::vector<double>>& chains) {
  double total = 0.0;
  for (const auto& ch : chains) total += ess_chain(ch);
  return total;
}

RHat r_hat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw NumericError("r_hat needs at least two chains");
  const std::size_t len = chains.front().size();
  for (const auto& ch : chains)
    if (ch.size() != len) throw NumericError("r_hat needs chains of equal length");
  if (len < 4) throw NumericError("chains too short for r_hat");

  const std::size_t half = len / 2;
  std::vector<double> means, vars;
  for (const auto& ch : chains)
    for (std::size_t part = 0; part < 2; ++part) {
      // With odd length the middle draw is dropped.
      const auto begin = ch.begin() + static_cast<std::ptrdiff_t>(part == 0 ? 0 : len - half);
      const double m = std::accumulate(begin, begin + static_cast<std::ptrdiff_t>(half), 0.0) /
                       static_cast<double>(half);
      double v = 0.0;
      for (auto it = begin; it != begin + static_cast<std::ptrdiff_t>(half); ++it)
        v += (*it - m) * (*it - m);
      means.push_back(m);
      vars.push_back(v / static_cast<double>(half - 1));
    }
  const double k = static_cast<double>(means.size());
  const double nh = static_cast<double>(half);
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / k;
  double b = 0.0;
  for (double m : means) b += (m - grand) * (m - grand);
  b *= nh / (k - 1.0);
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / k;
  if (!(w > 0.0)) return {1.0, true};
  const double var_plus = (nh - 1.0) / nh * w + b / nh;
  return {std::sqrt(var_plus / w), false};
}

double geometric_mean(std::span<const double> xs) {
  if (xs.empty()) throw NumericError("geometric mean of nothing");
  double acc = 0.0;
  for (double x : xs) {
    if (!(x > 0.0)) throw NumericError("geometric mean needs positive values");
    acc += std::log(x);
  }
  return std::exp(acc / static_cast<double>(xs.size()));
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw NumericError("quantile of nothing");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

}  // namespace wbi
