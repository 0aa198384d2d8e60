#pragma once

// Closed-form posterior and marginal likelihood for programs whose log-density
// is a quadratic in the latents: every mean is affine in the latents, every
// variance and branch condition is a positive constant, and only add and
// constant-scaled mul are applied to latent-dependent values.

#include <cstddef>
#include <optional>

#include <Eigen/Core>

#include "wbi/lang.hpp"
#include "wbi/rng.hpp"
#include "wbi/semantics.hpp"

namespace wbi {

/// log p(z) = constant + h'z - z'Pz/2.
struct LinearGaussian {
  Eigen::MatrixXd precision;
  Eigen::VectorXd linear;
  double constant = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(linear.size()); }
  Eigen::VectorXd mean() const;
  Eigen::MatrixXd covariance() const;
  /// log of the integral of p over R^n.
  double log_normaliser() const;
  /// Draws exact posterior samples.
  SampleMatrix sample(std::size_t count, Rng& rng) const;
};

/// The quadratic form of log p, or nullopt if the program is not linear-Gaussian.
std::optional<LinearGaussian> linear_gaussian(const Program& prog);

}  // namespace wbi
