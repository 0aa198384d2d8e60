#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "wbi/error.hpp"
#include "wbi/samplers.hpp"

namespace wbi {

namespace {

// Energy increase beyond which a trajectory is declared divergent.
constexpr double kDivergenceThreshold = 1000.0;

class Target {
 public:
  explicit Target(const Program& prog) : prog_(prog) {}
  std::size_t dim() const { return prog_.latent_count(); }
  double eval(const std::vector<double>& z, std::vector<double>& grad) const {
    return log_density_and_grad(prog_, z, grad);
  }

 private:
  const Program& prog_;
};

struct Point {
  std::vector<double> z, grad;
  double logp = 0.0;
};

// Dual averaging of log step size towards a target acceptance statistic.
class DualAveraging {
 public:
  void restart(double eps) {
    mu_ = std::log(10.0 * eps);
    h_bar_ = 0.0;
    log_eps_bar_ = 0.0;
    m_ = 0;
    log_eps_ = std::log(eps);
  }
  double update(double accept, double target) {
    ++m_;
    const double m = static_cast<double>(m_);
    const double w = 1.0 / (m + kT0);
    h_bar_ = (1.0 - w) * h_bar_ + w * (target - accept);
    log_eps_ = mu_ - std::sqrt(m) / kGamma * h_bar_;
    const double eta = std::pow(m, -kKappa);
    log_eps_bar_ = eta * log_eps_ + (1.0 - eta) * log_eps_bar_;
    return std::exp(log_eps_);
  }
  double final_step() const { return std::exp(log_eps_bar_); }

 private:
  static constexpr double kGamma = 0.05, kT0 = 10.0, kKappa = 0.75;
  double mu_ = 0.0, h_bar_ = 0.0, log_eps_bar_ = 0.0, log_eps_ = 0.0;
  std::size_t m_ = 0;
};

class Chain {
 public:
  Chain(const Target& target, const HmcConfig& cfg, std::size_t index)
      : target_(target), cfg_(cfg), rng_(derive_rng(cfg.seed, {stage::refsample, 100 + index})) {
    inv_metric_.assign(target.dim(), 1.0);
  }

  HmcChain run(const Program& prog) {
    const std::size_t n = target_.dim();
    HmcChain out;
    out.draws.resize(static_cast<Eigen::Index>(cfg_.samples), static_cast<Eigen::Index>(n));
    init(prog);
    double eps = cfg_.initial_step_size > 0.0 ? cfg_.initial_step_size : find_step_size(1.0);
    DualAveraging da;
    da.restart(eps);

    // Metric windows: draws in [begin, end) of warmup feed the variance
    // estimate; step size adaptation restarts at `end`.
    const std::size_t win_begin = cfg_.warmup * 15 / 100;
    const std::size_t win_end = cfg_.warmup * 75 / 100;
    std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
    std::size_t window_count = 0;
    std::size_t warm_ok = 0;

    for (std::size_t it = 0; it < cfg_.warmup; ++it) {
      bool divergent = false;
      const double accept = transition(eps, &divergent);
      if (divergent)
        ++out.warmup_divergences;
      else
        ++warm_ok;
      eps = da.update(accept, cfg_.target_accept);
      if (cfg_.adapt_metric && n > 0 && it >= win_begin && it < win_end) {
        for (std::size_t i = 0; i < n; ++i) {
          sum[i] += cur_.z[i];
          sum_sq[i] += cur_.z[i] * cur_.z[i];
        }
        ++window_count;
      }
      if (cfg_.adapt_metric && it + 1 == win_end && window_count > 2) {
        const double w = static_cast<double>(window_count);
        for (std::size_t i = 0; i < n; ++i) {
          const double var = std::max(0.0, (sum_sq[i] - sum[i] * sum[i] / w) / (w - 1.0));
          // Shrink towards a small constant as the window is short.
          inv_metric_[i] = (w / (w + 5.0)) * var + 1e-3 * (5.0 / (w + 5.0));
        }
        eps = find_step_size(eps);
        da.restart(eps);
      }
    }
    if (cfg_.warmup > 0 && warm_ok == 0) throw NumericError("every warmup trajectory diverged");
    if (cfg_.warmup > 0) eps = da.final_step();

    double accept_sum = 0.0;
    for (std::size_t it = 0; it < cfg_.samples; ++it) {
      bool divergent = false;
      accept_sum += transition(eps, &divergent);
      if (divergent) ++out.divergences;
      for (std::size_t i = 0; i < n; ++i)
        out.draws(static_cast<Eigen::Index>(it), static_cast<Eigen::Index>(i)) = cur_.z[i];
    }
    out.step_size = eps;
    out.inverse_metric = inv_metric_;
    out.accept_rate = cfg_.samples ? accept_sum / static_cast<double>(cfg_.samples) : 0.0;
    return out;
  }

 private:
  void init(const Program& prog) {
    cur_.z.assign(target_.dim(), 0.0);
    cur_.grad.assign(target_.dim(), 0.0);
    for (int attempt = 0; attempt < 100; ++attempt) {
      try {
        cur_.z = simulate(prog, rng_).latents;
      } catch (const NumericError&) {
        continue;
      }
      cur_.logp = target_.eval(cur_.z, cur_.grad);
      if (std::isfinite(cur_.logp)) return;
    }
    throw NumericError("no finite starting point found for HMC");
  }

  double kinetic(const std::vector<double>& p) const {
    double k = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) k += 0.5 * p[i] * p[i] * inv_metric_[i];
    return k;
  }

  // Runs one trajectory from cur_. Returns the Metropolis acceptance
  // probability; updates cur_ on acceptance.
  double transition(double eps, bool* divergent) {
    const std::size_t n = target_.dim();
    std::normal_distribution<double> normal;
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = normal(rng_) / std::sqrt(inv_metric_[i]);
    const double h0 = -cur_.logp + kinetic(p);

    Point next = cur_;
    bool ok = true;
    for (std::size_t l = 0; l < cfg_.leapfrog_steps && ok; ++l) {
      for (std::size_t i = 0; i < n; ++i) p[i] += 0.5 * eps * next.grad[i];
      for (std::size_t i = 0; i < n; ++i) next.z[i] += eps * inv_metric_[i] * p[i];
      next.logp = target_.eval(next.z, next.grad);
      if (!std::isfinite(next.logp)) {
        ok = false;
        break;
      }
      for (std::size_t i = 0; i < n; ++i) p[i] += 0.5 * eps * next.grad[i];
    }
    const double h1 = ok ? -next.logp + kinetic(p) : std::numeric_limits<double>::infinity();
    if (!std::isfinite(h1) || h1 - h0 > kDivergenceThreshold) {
      *divergent = true;
      return 0.0;
    }
    const double accept = std::min(1.0, std::exp(h0 - h1));
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < accept) cur_ = std::move(next);
    return accept;
  }

  // Doubles or halves eps until the one-step acceptance crosses 1/2.
  double find_step_size(double eps) {
    const std::size_t n = target_.dim();
    if (n == 0) return eps;
    std::normal_distribution<double> normal;
    auto one_step = [&](double e) {
      std::vector<double> p(n);
      for (std::size_t i = 0; i < n; ++i) p[i] = normal(rng_) / std::sqrt(inv_metric_[i]);
      const double h0 = -cur_.logp + kinetic(p);
      Point next = cur_;
      for (std::size_t i = 0; i < n; ++i) p[i] += 0.5 * e * next.grad[i];
      for (std::size_t i = 0; i < n; ++i) next.z[i] += e * inv_metric_[i] * p[i];
      next.logp = target_.eval(next.z, next.grad);
      if (!std::isfinite(next.logp)) return -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) p[i] += 0.5 * e * next.grad[i];
      return h0 - (-next.logp + kinetic(p));
    };
    const double log_half = std::log(0.5);
    const double dir = one_step(eps) > log_half ? 1.0 : -1.0;
    for (int k = 0; k < 60; ++k) {
      const double d = one_step(eps);
      if (dir > 0 ? !(d > log_half) : d > log_half) break;
      eps *= dir > 0 ? 2.0 : 0.5;
    }
    return eps;
  }

  const Target& target_;
  const HmcConfig& cfg_;
  Rng rng_;
  std::vector<double> inv_metric_;
  Point cur_;
};

}  // namespace

SampleMatrix HmcResult::pooled() const {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& c : chains) rows += c.draws.rows(), cols = c.draws.cols();
  SampleMatrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& c : chains) {
    out.middleRows(at, c.draws.rows()) = c.draws;
    at += c.draws.rows();
  }
  return out;
}

std::size_t HmcResult::divergences() const {
  std::size_t k = 0;
  for (const auto& c : chains) k += c.divergences;
  return k;
}

std::vector<std::vector<double>> HmcResult::coordinate(std::size_t i) const {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    const auto col = c.draws.col(static_cast<Eigen::Index>(i));
    out.emplace_back(col.begin(), col.end());
  }
  return out;
}

HmcResult hmc(const Program& prog, const HmcConfig& cfg) {
  if (cfg.leapfrog_steps < 1) throw Error("HMC needs at least one leapfrog step");
  if (cfg.chains < 1) throw Error("HMC needs at least one chain");
  Target target(prog);
  HmcResult res;
  res.chains.resize(cfg.chains);
  const std::size_t threads = std::max<std::size_t>(1, std::min(cfg.threads, cfg.chains));
  if (threads == 1) {
    for (std::size_t c = 0; c < cfg.chains; ++c) res.chains[c] = Chain(target, cfg, c).run(prog);
    return res;
  }
  std::vector<std::exception_ptr> errors(cfg.chains);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t c = t; c < cfg.chains; c += threads) try {
          res.chains[c] = Chain(target, cfg, c).run(prog);
        } catch (...) {
          errors[c] = std::current_exception();
        }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return res;
}

}  // namespace wbi
