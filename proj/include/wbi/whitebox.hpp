#pragma once

// The neural inference interpreter. A program is scanned once; every command
// updates a state vector h through the network of its command type, and each
// observe also multiplies the running marginal-likelihood estimate Z by a
// positive network output. The final h is decoded into a mean-field Gaussian.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "wbi/autodiff.hpp"
#include "wbi/lang.hpp"
#include "wbi/procedures.hpp"
#include "wbi/rng.hpp"
#include "wbi/semantics.hpp"

namespace wbi {

/// Transform applied to real constants before they enter a network.
enum class InputScaling {
  raw,         // r
  signed_log,  // sign(r) * log(1 + |r|)
};

std::string to_string(InputScaling s);
InputScaling scaling_from_string(const std::string& s);

struct BankDims {
  std::size_t m = 0;  // one-hot length; upper bound on a program's variable count
  std::size_t n = 0;  // latent count; programs must match exactly
  std::size_t s = 10;
  std::size_t hidden = 10;
  std::size_t decoder_hidden = 50;
  friend bool operator==(const BankDims&, const BankDims&) = default;
};

/// Output constraints: log-variances and log-factors are clamped to this range.
inline constexpr double kLogClamp = 30.0;

class NetworkBank {
 public:
  NetworkBank() = default;
  /// Randomly initialised bank with one call network per registered procedure.
  static NetworkBank create(const BankDims& dims, std::uint64_t seed,
                            const ProcedureRegistry& reg = ProcedureRegistry::builtin(),
                            InputScaling scaling = InputScaling::raw);
  /// All weights and biases zero.
  static NetworkBank zeros(const BankDims& dims,
                           const ProcedureRegistry& reg = ProcedureRegistry::builtin(),
                           InputScaling scaling = InputScaling::raw);
  static NetworkBank zeros(const BankDims& dims, const std::vector<std::string>& procedures,
                           InputScaling scaling);

  const BankDims& dims() const { return dims_; }
  InputScaling scaling() const { return scaling_; }
  double scale_input(double r) const;

  ad::Mlp& sample_net() { return sa_; }
  ad::Mlp& observe_net() { return ob_; }
  ad::Mlp& if_net() { return if_; }
  ad::Mlp& assign_const_net() { return assign_const_; }
  ad::Mlp& assign_var_net() { return assign_var_; }
  ad::Mlp& call_net(const std::string& proc);
  ad::Mlp& decoder() { return de_; }
  ad::Mlp& integrator() { return intg_; }
  const ad::Mlp& sample_net() const { return sa_; }
  const ad::Mlp& observe_net() const { return ob_; }
  const ad::Mlp& if_net() const { return if_; }
  const ad::Mlp& assign_const_net() const { return assign_const_; }
  const ad::Mlp& assign_var_net() const { return assign_var_; }
  const ad::Mlp& call_net(const std::string& proc) const;
  const ad::Mlp& decoder() const { return de_; }
  const ad::Mlp& integrator() const { return intg_; }
  std::vector<std::string> procedures() const;

  /// Every parameter in a fixed order (command networks, calls by name,
  /// decoder, integrator).
  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
  std::size_t parameter_count() const;

 private:
  NetworkBank(const BankDims& dims, const std::vector<std::string>& procs, InputScaling scaling);
  BankDims dims_;
  InputScaling scaling_ = InputScaling::raw;
  ad::Mlp sa_, ob_, if_, assign_const_, assign_var_, de_, intg_;
  std::map<std::string, ad::Mlp> calls_;
};

struct InferState {
  ad::Vector h;
  double log_z = 0.0;  // Z is kept in log space
  double z() const;
  static InferState initial(std::size_t s);
};

struct MeanFieldPosterior {
  ad::Vector mean;
  ad::Vector variance;

  std::size_t size() const { return static_cast<std::size_t>(mean.size()); }
  double log_density(std::span<const double> z) const;
};

/// log N(z; post) summed over coordinates.
double log_q(const MeanFieldPosterior& post, std::span<const double> z);

struct InferResult {
  MeanFieldPosterior posterior;
  double log_z = 0.0;
  double z() const;
};

/// Network input of a command without the state part: the one-hot encodings
/// of its variables followed by its real constant, if any.
ad::Vector command_features(const NetworkBank& bank, const AtomicCommand& cmd);

/// One interpreter step. Throws ShapeError for an unregistered procedure or a
/// variable index >= m.
InferState step(const NetworkBank& bank, const AtomicCommand& cmd, InferState state);

/// log of the factor an observe multiplies into Z, given the state before it.
double observe_log_factor(const NetworkBank& bank, const Observe& cmd, const ad::Vector& h);

MeanFieldPosterior decode(const NetworkBank& bank, const ad::Vector& h);

/// Folds step over the program from the initial state and decodes. When
/// `stats` is given, records one scan plus the network calls made.
InferResult infer(const NetworkBank& bank, const Program& prog, ScanStats* stats = nullptr);

/// Taped counterpart of infer: the decoded means, clamped log-variances and
/// log Z as tensors on `tape`.
struct TapedInference {
  ad::Tensor mean;
  ad::Tensor logvar;
  ad::Tensor log_z;
};
TapedInference infer_taped(ad::Tape& tape, NetworkBank& bank, const Program& prog);

/// Taped -log q(z) summed over a weighted batch.
ad::Tensor neg_log_q(const TapedInference& inf, const ad::WeightedMoments& moments);

/// Checks that a program can be inferred by the bank.
void check_compatible(const NetworkBank& bank, const Program& prog);

}  // namespace wbi
