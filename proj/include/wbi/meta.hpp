#pragma once

// Meta-training of a network bank over a corpus of programs with cached
// reference samples. Per program C the objective is
//
//   -sum_j w_j log q_C(z_j) + (lambda / 2) (N_C - Z_C)^2
//
// with w_j self-normalised over the minibatch (sum to 1).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wbi/autodiff.hpp"
#include "wbi/lang.hpp"
#include "wbi/samplers.hpp"
#include "wbi/whitebox.hpp"

namespace wbi {

struct CorpusEntry {
  std::string label;
  Program program;
  WeightedSampleSet cache;  // read-only during training
  /// Reference posterior moments and log marginal likelihood; from a
  /// closed form when available, else from the cache.
  Eigen::VectorXd ref_mean, ref_var;
  double ref_log_z = 0.0;
};

struct TrainingCorpus {
  std::vector<CorpusEntry> train;
  std::vector<CorpusEntry> test;
};

/// Smallest bank shape admitting every program: m is the largest variable
/// count; all programs must share one latent count (ShapeError otherwise).
BankDims dims_for(const std::vector<const Program*>& programs);
BankDims dims_for(const TrainingCorpus& corpus);

enum class ReferenceMethod {
  exact,     // closed-form posterior samples; linear-Gaussian programs only
  snis,      // prior-proposal importance sampling
  hmc_lais,  // HMC draws with uniform weights, N-hat from the mixture sampler
};

std::string to_string(ReferenceMethod m);
ReferenceMethod reference_method_from_string(const std::string& s);

struct ReferenceConfig {
  ReferenceMethod method = ReferenceMethod::exact;
  std::size_t samples = 4096;
  std::uint64_t seed = 0;
  HmcConfig hmc;  // samples and seed are overridden by the fields above
  std::size_t lais_samples = 4096;
};

/// Builds the cached reference for one program.
WeightedSampleSet reference_samples(const Program& prog, const ReferenceConfig& cfg);
CorpusEntry make_entry(std::string label, Program prog, const ReferenceConfig& cfg);
/// Fills ref_mean, ref_var and ref_log_z, preferring the closed form.
void set_reference(CorpusEntry& entry);

struct TrainConfig {
  double lambda = 2.0;
  ad::AdamConfig adam;  // lr 1e-3, betas (0.9, 0.999), no weight decay
  std::size_t minibatch = 4096;
  std::size_t epochs = 100;
  std::size_t smoothing = 8;     // training loss is averaged over this many epochs
  std::size_t log_every = 1;     // epochs between loss-log rows
  std::uint64_t seed = 0;
  bool plateau_stop = false;     // stop when the smoothed training loss stalls
  std::size_t plateau_patience = 200;
  double plateau_tolerance = 1e-4;
  std::size_t threads = 1;       // test-loss evaluation workers
};

struct LossParts {
  double cross_entropy = 0.0;
  double penalty = 0.0;
  double total() const { return cross_entropy + penalty; }
};

/// A minibatch reduced to its weighted moments (weights sum to 1).
struct Batch {
  ad::WeightedMoments moments;
  double log_normaliser = 0.0;
};

/// The whole cache as one batch.
Batch full_batch(const WeightedSampleSet& cache);
/// `size` distinct cache rows chosen uniformly; weights renormalised.
Batch sample_batch(const WeightedSampleSet& cache, std::size_t size, Rng& rng);

/// Taped objective; parts receives the value split.
ad::Tensor loss(ad::Tape& tape, NetworkBank& bank, const Program& prog, const Batch& batch,
                double lambda, LossParts* parts = nullptr);
/// Objective value without a tape.
LossParts loss_value(const NetworkBank& bank, const Program& prog, const Batch& batch,
                     double lambda);

/// Backward through the loss and one optimiser update. Returns the loss
/// before the update.
LossParts grad_step(NetworkBank& bank, ad::Adam& opt, const Program& prog, const Batch& batch,
                    double lambda);

struct LossRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // smoothed
  double test_loss = 0.0;   // smoothed like train_loss
  double train_loss_raw = 0.0;
  double test_loss_raw = 0.0;
  LossParts train_parts, test_parts;  // raw
  double wall_ms = 0.0;
};

struct TrainResult {
  std::vector<LossRecord> log;
  std::size_t epochs_run = 0;
  bool stopped_on_plateau = false;
};

/// Writes the loss log as CSV.
std::string loss_csv(const std::vector<LossRecord>& log);

/// Epoch = one pass over the training programs in a freshly shuffled order
/// with one grad_step each. Throws Error for an empty training set.
/// `on_epoch` (optional) runs after every epoch.
TrainResult train(NetworkBank& bank, const TrainingCorpus& corpus, const TrainConfig& cfg,
                  const std::function<void(std::size_t, const NetworkBank&)>& on_epoch = {});

/// Mean loss of `entries` on their full caches.
LossParts mean_loss(const NetworkBank& bank, const std::vector<CorpusEntry>& entries,
                    double lambda, std::size_t threads = 1);

struct ProgramReport {
  std::string label;
  std::vector<double> pred_mean, pred_var, ref_mean, ref_var;
  double kl = 0.0;           // sum over latents of KL[N(ref) || N(pred)]
  double baseline_kl = 0.0;  // same with the flat proposal N(0, 1e4)
  double pred_log_z = 0.0, ref_log_z = 0.0;
  double z_rel_error = 0.0;  // |Z - N| / N
  /// |pred mean - ref mean| / ref sd, per latent.
  std::vector<double> mean_error_sd;
};

struct EvalReport {
  std::vector<ProgramReport> programs;
  double mean_kl = 0.0, median_kl = 0.0;
  double mean_baseline_kl = 0.0;
  double mean_z_rel_error = 0.0, median_z_rel_error = 0.0;
};

/// KL[N(m1, v1) || N(m2, v2)].
double gaussian_kl(double m1, double v1, double m2, double v2);

EvalReport evaluate(const NetworkBank& bank, const std::vector<CorpusEntry>& entries);

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Results must
/// be written by index; exceptions are rethrown in index order.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace wbi
