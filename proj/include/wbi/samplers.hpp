#pragma once

// Reference inference: HMC, self-normalised importance sampling and a
// mixture-over-chain-states importance sampler for marginal likelihoods.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wbi/lang.hpp"
#include "wbi/semantics.hpp"
#include "wbi/whitebox.hpp"

namespace wbi {

enum class ProposalTag : std::uint32_t { prior = 0, predicted = 1, lais = 2, hmc = 3, exact = 4 };

std::string to_string(ProposalTag t);
ProposalTag proposal_tag_from_string(const std::string& s);

struct WeightedSampleSet {
  SampleMatrix samples;              // M x n
  std::vector<double> log_weights;   // length M; -inf marks a zero weight
  double log_normaliser = 0.0;       // log N-hat
  ProposalTag tag = ProposalTag::prior;
  std::uint64_t seed = 0;

  std::size_t size() const { return log_weights.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(samples.cols()); }
  double normaliser() const;
  /// Weights scaled to sum to 1.
  std::vector<double> normalised_weights() const;
  /// Self-normalised posterior mean and variance of each latent.
  void moments(Eigen::VectorXd& mean, Eigen::VectorXd& variance) const;
};

/// log((1/M) sum exp(lw)). Throws NumericError if every weight is zero.
double log_mean_exp(std::span<const double> log_weights);

// --- importance sampling ---------------------------------------------------

/// Prior proposal: log w = log-likelihood of the observations.
WeightedSampleSet snis_prior(const Program& prog, std::size_t count, std::uint64_t seed,
                             ScanStats* stats = nullptr);

/// Proposal q: log w = log p(z) - log q(z). Sampling and weighting share a
/// single batched scan of the program.
WeightedSampleSet snis_proposal(const Program& prog, const MeanFieldPosterior& q,
                                std::size_t count, std::uint64_t seed, ScanStats* stats = nullptr);

struct LaisConfig {
  std::size_t max_centres = 256;  // chain states are thinned to at most this many
  /// Per-coordinate kernel sd; empty means the chain's per-coordinate sd.
  std::vector<double> proposal_sd;
};

/// Proposal: uniform mixture of Gaussians N(c_k, diag(sd^2)) over thinned
/// chain states c_k. Throws NumericError for an empty chain.
WeightedSampleSet lais(const Program& prog, const SampleMatrix& chain, std::size_t count,
                       std::uint64_t seed, const LaisConfig& cfg = {});

// --- HMC -------------------------------------------------------------------

struct HmcConfig {
  std::size_t leapfrog_steps = 32;
  double initial_step_size = 0.0;  // <= 0 picks one heuristically
  std::size_t warmup = 1000;
  std::size_t samples = 10000;
  std::size_t chains = 1;
  std::uint64_t seed = 0;
  double target_accept = 0.8;
  bool adapt_metric = true;  // diagonal mass matrix estimated during warmup
  std::size_t threads = 1;
};

struct HmcChain {
  SampleMatrix draws;  // samples x n
  double step_size = 0.0;
  std::vector<double> inverse_metric;
  double accept_rate = 0.0;
  std::size_t divergences = 0;
  std::size_t warmup_divergences = 0;
};

struct HmcResult {
  std::vector<HmcChain> chains;
  SampleMatrix pooled() const;
  std::size_t divergences() const;
  /// Draws of latent i, one vector per chain.
  std::vector<std::vector<double>> coordinate(std::size_t i) const;
};

/// Leapfrog HMC with dual-averaging step size adaptation. Divergent
/// trajectories are rejected and counted. Throws NumericError if every
/// warmup trajectory diverges or no finite starting point is found.
HmcResult hmc(const Program& prog, const HmcConfig& cfg);

}  // namespace wbi
