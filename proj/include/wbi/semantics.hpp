#pragma once

// Density semantics of programs. A program with latents z_1..z_n (in sampling
// order) and observations r_1..r_k denotes the unnormalised density
//
//   p(z) = prod_i N(z_i; mean_i(z), var_i(z)) * prod_j N(r_j; mean_j(z), var_j(z))
//
// where N(a; b, c) is the normal density with variance c when c > 0 and the
// constant 1 when c <= 0.

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "wbi/lang.hpp"
#include "wbi/procedures.hpp"
#include "wbi/rng.hpp"

namespace wbi {

using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// N(a; b, c) with c the variance; exactly 1 when c <= 0.
double gauss_density_term(double a, double b, double c);
/// log N(a; b, c); exactly 0 when c <= 0.
double log_gauss_term(double a, double b, double c);

struct LogDensity {
  double prior = 0.0;       // sum over sample commands
  double likelihood = 0.0;  // sum over observe commands
  double total() const { return prior + likelihood; }
};

/// Splits log p(z) into its prior and likelihood parts. Throws NumericError
/// with the command index when an intermediate value is not finite.
LogDensity log_density_parts(const Program& prog, std::span<const double> z,
                             const ProcedureRegistry& reg = ProcedureRegistry::builtin());

double log_density(const Program& prog, std::span<const double> z,
                   const ProcedureRegistry& reg = ProcedureRegistry::builtin());

/// Gradient of log_density with respect to z. Branch conditions are treated
/// as locally constant.
std::vector<double> grad_log_density(const Program& prog, std::span<const double> z,
                                     const ProcedureRegistry& reg = ProcedureRegistry::builtin());

/// Like log_density + grad_log_density but never throws: a non-finite
/// intermediate yields a NaN value. Used on sampler hot paths.
double log_density_and_grad(const Program& prog, std::span<const double> z, std::span<double> grad,
                            const ProcedureRegistry& reg = ProcedureRegistry::builtin());

/// Values of every variable (indexed by slot) at latent vector z.
std::vector<double> valuation(const Program& prog, std::span<const double> z,
                              const ProcedureRegistry& reg = ProcedureRegistry::builtin());

struct Simulation {
  std::vector<double> latents;       // in sampling order
  std::vector<double> observations;  // one draw per observe command
};

/// Replaces the sampling distribution of selected latents during simulation:
/// latent v is drawn from U(mean - k*sqrt(var), mean + k*sqrt(var)).
using ClippedUniformOverrides = std::map<std::uint32_t, double>;

/// Ancestral simulation. Observe commands emit a draw from their likelihood.
/// Throws NumericError on a non-positive variance at a sample or observe.
Simulation simulate(const Program& prog, Rng& rng, const ClippedUniformOverrides& overrides = {},
                    const ProcedureRegistry& reg = ProcedureRegistry::builtin());

/// Copy of `prog` with the observed values replaced.
Program with_observations(Program prog, std::span<const double> obs);

/// Counts passes of an interpreter over a program.
struct ScanStats {
  std::size_t scans = 0;
  std::size_t state_updates = 0;  // network calls that update the state
  std::size_t integrations = 0;   // marginal-likelihood network calls
  std::size_t decodes = 0;
};

/// Evaluates log p(z) for every row of `z` in a single pass over the program.
/// Rows with a non-finite intermediate get NaN in both outputs.
void log_density_batch(const Program& prog, const SampleMatrix& z, std::vector<double>& log_prior,
                       std::vector<double>& log_likelihood, ScanStats* stats = nullptr,
                       const ProcedureRegistry& reg = ProcedureRegistry::builtin());

/// Draws `count` ancestral samples of the latents in a single pass and
/// returns the log-likelihood of the recorded observations at each.
void simulate_prior_batch(const Program& prog, std::size_t count, Rng& rng, SampleMatrix& z,
                          std::vector<double>& log_likelihood, ScanStats* stats = nullptr,
                          const ProcedureRegistry& reg = ProcedureRegistry::builtin());

/// Sample or observe commands whose variance argument is a constant <= 0.
/// Such programs are improper under the density semantics.
std::vector<std::size_t> lint_nonpositive_variances(const Program& prog);

}  // namespace wbi
