#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wbi {

/// (sum w)^2 / sum w^2. Throws NumericError if no weight is positive and finite.
/// Non-finite weights count as zero.
double ess_weights(std::span<const double> weights);
/// ess_weights on exp(log_weights), computed stably.
double ess_log_weights(std::span<const double> log_weights);

/// Autocorrelation ESS of one chain: N / (1 + 2 sum rho_t), with the sum
/// truncated by Geyer's initial monotone positive sequence. Throws
/// NumericError for fewer than 4 draws. A constant chain returns N.
double ess_chain(std::span<const double> chain);

/// Sum of the per-chain ESS values.
double ess_chains(const std::vector<std::vector<double>>& chains);

struct RHat {
  double value = 1.0;
  bool degenerate = false;  // zero within-chain variance; value forced to 1
};

/// Split R-hat: every chain is halved and the potential scale reduction of
/// the 2k halves is returned. Needs >= 2 chains of equal length >= 4.
RHat r_hat(const std::vector<std::vector<double>>& chains);

/// Geometric mean of positive values.
double geometric_mean(std::span<const double> xs);
/// Quantile with linear interpolation between order statistics
/// (position q * (N - 1)).
double quantile(std::vector<double> xs, double q);

}  // namespace wbi
