#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "wbi/error.hpp"
#include "wbi/samplers.hpp"

namespace wbi {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void finish(WeightedSampleSet& ws) {
  for (double& lw : ws.log_weights)
    if (!std::isfinite(lw)) lw = kNegInf;
  ws.log_normaliser = log_mean_exp(ws.log_weights);
}

}  // namespace

std::string to_string(ProposalTag t) {
  switch (t) {
    case ProposalTag::prior: return "prior";
    case ProposalTag::predicted: return "predicted";
    case ProposalTag::lais: return "lais";
    case ProposalTag::hmc: return "hmc";
    case ProposalTag::exact: return "exact";
  }
  return "unknown";
}

ProposalTag proposal_tag_from_string(const std::string& s) {
  for (auto t : {ProposalTag::prior, ProposalTag::predicted, ProposalTag::lais, ProposalTag::hmc,
                 ProposalTag::exact})
    if (to_string(t) == s) return t;
  throw Error("unknown proposal tag '" + s + "'");
}

double log_mean_exp(std::span<const double> lw) {
  double hi = kNegInf;
  for (double x : lw)
    if (std::isfinite(x)) hi = std::max(hi, x);
  if (!std::isfinite(hi)) throw NumericError("all importance weights are zero or non-finite");
  double acc = 0.0;
  for (double x : lw)
    if (std::isfinite(x)) acc += std::exp(x - hi);
  return hi + std::log(acc / static_cast<double>(lw.size()));
}

double WeightedSampleSet::normaliser() const { return std::exp(log_normaliser); }

std::vector<double> WeightedSampleSet::normalised_weights() const {
  double hi = kNegInf;
  for (double x : log_weights)
    if (std::isfinite(x)) hi = std::max(hi, x);
  std::vector<double> w(log_weights.size(), 0.0);
  if (!std::isfinite(hi)) return w;
  double total = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    w[j] = std::isfinite(log_weights[j]) ? std::exp(log_weights[j] - hi) : 0.0;
    total += w[j];
  }
  for (double& x : w) x /= total;
  return w;
}

void WeightedSampleSet::moments(Eigen::VectorXd& mean, Eigen::VectorXd& variance) const {
  const auto w = normalised_weights();
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
  mean = samples.transpose() * wv;
  variance = Eigen::VectorXd::Zero(samples.cols());
  for (Eigen::Index j = 0; j < samples.rows(); ++j)
    if (wv(j) > 0.0) variance += wv(j) * (samples.row(j).transpose() - mean).array().square().matrix();
}

WeightedSampleSet snis_prior(const Program& prog, std::size_t count, std::uint64_t seed,
                             ScanStats* stats) {
  WeightedSampleSet ws;
  ws.tag = ProposalTag::prior;
  ws.seed = seed;
  Rng rng = derive_rng(seed, {stage::refsample, 0});
  simulate_prior_batch(prog, count, rng, ws.samples, ws.log_weights, stats);
  finish(ws);
  return ws;
}

WeightedSampleSet snis_proposal(const Program& prog, const MeanFieldPosterior& q,
                                std::size_t count, std::uint64_t seed, ScanStats* stats) {
  const std::size_t n = prog.latent_count();
  if (q.size() != n) throw ShapeError("proposal dimension does not match program");
  WeightedSampleSet ws;
  ws.tag = ProposalTag::predicted;
  ws.seed = seed;
  ws.samples.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(n));
  std::vector<double> log_q(count, 0.0);
  Rng rng = derive_rng(seed, {stage::refsample, 1});
  std::normal_distribution<double> normal;
  for (std::size_t j = 0; j < count; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double e = normal(rng);
      ws.samples(static_cast<Eigen::Index>(j), ii) = q.mean(ii) + std::sqrt(q.variance(ii)) * e;
      log_q[j] += -kHalfLog2Pi - 0.5 * std::log(q.variance(ii)) - 0.5 * e * e;
    }
  std::vector<double> log_prior;
  log_density_batch(prog, ws.samples, log_prior, ws.log_weights, stats);
  for (std::size_t j = 0; j < count; ++j) ws.log_weights[j] += log_prior[j] - log_q[j];
  finish(ws);
  return ws;
}

WeightedSampleSet lais(const Program& prog, const SampleMatrix& chain, std::size_t count,
                       std::uint64_t seed, const LaisConfig& cfg) {
  if (chain.rows() == 0) throw NumericError("lais needs a non-empty chain");
  const Eigen::Index n = chain.cols();
  if (static_cast<std::size_t>(n) != prog.latent_count())
    throw ShapeError("chain dimension does not match program");

  const Eigen::Index stride =
      std::max<Eigen::Index>(1, (chain.rows() + static_cast<Eigen::Index>(cfg.max_centres) - 1) /
                                    static_cast<Eigen::Index>(cfg.max_centres));
  SampleMatrix centres((chain.rows() + stride - 1) / stride, n);
  for (Eigen::Index k = 0; k < centres.rows(); ++k) centres.row(k) = chain.row(k * stride);
  const Eigen::Index kc = centres.rows();

  Eigen::VectorXd sd(n);
  if (!cfg.proposal_sd.empty()) {
    if (cfg.proposal_sd.size() == 1)
      sd.setConstant(cfg.proposal_sd[0]);
    else if (cfg.proposal_sd.size() == static_cast<std::size_t>(n))
      sd = Eigen::Map<const Eigen::VectorXd>(cfg.proposal_sd.data(), n);
    else
      throw ShapeError("proposal_sd has the wrong length");
  } else {
    const Eigen::RowVectorXd mu = chain.colwise().mean();
    sd = ((chain.rowwise() - mu).array().square().colwise().sum() /
          std::max<double>(1.0, static_cast<double>(chain.rows() - 1)))
             .sqrt()
             .transpose();
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(sd(i) > 0.0)) sd(i) = 1.0;
  const double log_norm_const =
      -static_cast<double>(n) * kHalfLog2Pi - sd.array().log().sum() - std::log(static_cast<double>(kc));
  const Eigen::ArrayXd inv_sd = sd.array().inverse();

  WeightedSampleSet ws;
  ws.tag = ProposalTag::lais;
  ws.seed = seed;
  ws.samples.resize(static_cast<Eigen::Index>(count), n);
  Rng rng = derive_rng(seed, {stage::refsample, 2});
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<Eigen::Index> pick(0, kc - 1);
  for (Eigen::Index j = 0; j < ws.samples.rows(); ++j) {
    const Eigen::Index k = pick(rng);
    for (Eigen::Index i = 0; i < n; ++i) ws.samples(j, i) = centres(k, i) + sd(i) * normal(rng);
  }

  std::vector<double> log_prior;
  log_density_batch(prog, ws.samples, log_prior, ws.log_weights);
  std::vector<double> terms(static_cast<std::size_t>(kc));
  for (Eigen::Index j = 0; j < ws.samples.rows(); ++j) {
    double hi = kNegInf;
    for (Eigen::Index k = 0; k < kc; ++k) {
      const double q =
          -0.5 * ((ws.samples.row(j) - centres.row(k)).array() * inv_sd.transpose()).square().sum();
      terms[static_cast<std::size_t>(k)] = q;
      hi = std::max(hi, q);
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - hi);
    const double log_mix = log_norm_const + hi + std::log(acc);
    auto& lw = ws.log_weights[static_cast<std::size_t>(j)];
    lw += log_prior[static_cast<std::size_t>(j)] - log_mix;
  }
  finish(ws);
  return ws;
}

}  // namespace wbi
