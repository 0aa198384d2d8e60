#include "wbi/whitebox.hpp"

#include <algorithm>
#include <cmath>

#include "wbi/error.hpp"

namespace wbi {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::size_t feature_width(CommandKind k, std::size_t m) {
  switch (k) {
    case CommandKind::sample: return 3 * m;
    case CommandKind::observe: return 2 * m + 1;
    case CommandKind::if_gt: return 5 * m;
    case CommandKind::assign_const: return m + 1;
    case CommandKind::assign_var: return 2 * m;
    case CommandKind::call: return 3 * m;
  }
  return 0;
}

std::vector<std::string> proc_names(const ProcedureRegistry& reg) { return reg.names(); }

}  // namespace

std::string to_string(InputScaling s) { return s == InputScaling::raw ? "raw" : "signed_log"; }

InputScaling scaling_from_string(const std::string& s) {
  if (s == "raw") return InputScaling::raw;
  if (s == "signed_log") return InputScaling::signed_log;
  throw Error("unknown input scaling '" + s + "'");
}

NetworkBank::NetworkBank(const BankDims& d, const std::vector<std::string>& procs,
                         InputScaling scaling)
    : dims_(d), scaling_(scaling) {
  if (d.m == 0 || d.s == 0) throw ShapeError("bank dimensions must be positive");
  const std::size_t m = d.m, s = d.s, h = d.hidden;
  sa_ = ad::Mlp("sample", feature_width(CommandKind::sample, m) + s, h, s);
  ob_ = ad::Mlp("observe", feature_width(CommandKind::observe, m) + s, h, s);
  if_ = ad::Mlp("if", feature_width(CommandKind::if_gt, m) + s, h, s);
  assign_const_ = ad::Mlp("assign_const", feature_width(CommandKind::assign_const, m) + s, h, s);
  assign_var_ = ad::Mlp("assign_var", feature_width(CommandKind::assign_var, m) + s, h, s);
  for (const auto& p : procs)
    calls_.emplace(p, ad::Mlp("call_" + p, feature_width(CommandKind::call, m) + s, h, s));
  de_ = ad::Mlp("decoder", s, d.decoder_hidden, 2 * d.n);
  intg_ = ad::Mlp("integrate", feature_width(CommandKind::observe, m) + s, h, 1);
}

NetworkBank NetworkBank::create(const BankDims& dims, std::uint64_t seed,
                                const ProcedureRegistry& reg, InputScaling scaling) {
  NetworkBank bank(dims, proc_names(reg), scaling);
  Rng rng = derive_rng(seed, {stage::init});
  for (ad::Mlp* net : {&bank.sa_, &bank.ob_, &bank.if_, &bank.assign_const_, &bank.assign_var_})
    net->init_uniform(rng);
  for (auto& [name, net] : bank.calls_) net.init_uniform(rng);
  bank.de_.init_uniform(rng);
  bank.intg_.init_uniform(rng);
  return bank;
}

NetworkBank NetworkBank::zeros(const BankDims& dims, const ProcedureRegistry& reg,
                               InputScaling scaling) {
  return NetworkBank(dims, proc_names(reg), scaling);
}

NetworkBank NetworkBank::zeros(const BankDims& dims, const std::vector<std::string>& procedures,
                               InputScaling scaling) {
  return NetworkBank(dims, procedures, scaling);
}

double NetworkBank::scale_input(double r) const {
  if (scaling_ == InputScaling::raw) return r;
  return std::copysign(std::log1p(std::abs(r)), r);
}

ad::Mlp& NetworkBank::call_net(const std::string& proc) {
  auto it = calls_.find(proc);
  if (it == calls_.end()) throw ShapeError("no network for procedure '" + proc + "'");
  return it->second;
}

const ad::Mlp& NetworkBank::call_net(const std::string& proc) const {
  auto it = calls_.find(proc);
  if (it == calls_.end()) throw ShapeError("no network for procedure '" + proc + "'");
  return it->second;
}

std::vector<std::string> NetworkBank::procedures() const {
  std::vector<std::string> out;
  for (const auto& [name, net] : calls_) out.push_back(name);
  return out;
}

std::vector<ad::Parameter*> NetworkBank::parameters() {
  std::vector<ad::Parameter*> out;
  auto take = [&](ad::Mlp& net) {
    for (ad::Parameter* p : net.parameters()) out.push_back(p);
  };
  for (ad::Mlp* net : {&sa_, &ob_, &if_, &assign_const_, &assign_var_}) take(*net);
  for (auto& [name, net] : calls_) take(net);
  take(de_);
  take(intg_);
  return out;
}

std::vector<const ad::Parameter*> NetworkBank::parameters() const {
  std::vector<const ad::Parameter*> out;
  for (ad::Parameter* p : const_cast<NetworkBank*>(this)->parameters()) out.push_back(p);
  return out;
}

std::size_t NetworkBank::parameter_count() const {
  std::size_t k = 0;
  for (const ad::Parameter* p : parameters()) k += p->size();
  return k;
}

double InferState::z() const { return std::exp(log_z); }

InferState InferState::initial(std::size_t s) { return {ad::Vector::Zero(static_cast<Eigen::Index>(s)), 0.0}; }

double MeanFieldPosterior::log_density(std::span<const double> z) const { return log_q(*this, z); }

double log_q(const MeanFieldPosterior& post, std::span<const double> z) {
  if (z.size() != post.size()) throw ShapeError("latent vector does not match posterior");
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double d = z[i] - post.mean(k);
    acc += -kHalfLog2Pi - 0.5 * std::log(post.variance(k)) - 0.5 * d * d / post.variance(k);
  }
  return acc;
}

double InferResult::z() const { return std::exp(log_z); }

ad::Vector command_features(const NetworkBank& bank, const AtomicCommand& cmd) {
  const std::size_t m = bank.dims().m;
  ad::Vector x = ad::Vector::Zero(static_cast<Eigen::Index>(feature_width(kind_of(cmd), m)));
  std::size_t block = 0;
  auto hot = [&](VarId v) {
    if (v.index >= m) throw ShapeError("variable index exceeds bank width");
    x(static_cast<Eigen::Index>(block * m + v.index)) = 1.0;
    ++block;
  };
  auto real = [&](double r) { x(x.size() - 1) = bank.scale_input(r); };
  std::visit(overloaded{
                 [&](const Sample& c) { hot(c.target), hot(c.mean), hot(c.variance); },
                 [&](const Observe& c) { hot(c.mean), hot(c.variance), real(c.value); },
                 [&](const IfGt& c) {
                   hot(c.target), hot(c.lhs), hot(c.rhs), hot(c.then_var), hot(c.else_var);
                 },
                 [&](const AssignConst& c) { hot(c.target), real(c.value); },
                 [&](const AssignVar& c) { hot(c.target), hot(c.source); },
                 [&](const Call& c) {
                   // A unary call leaves the last block zero.
                   hot(c.target);
                   for (VarId a : c.args) hot(a);
                 },
             },
             cmd);
  return x;
}

namespace {

const ad::Mlp& net_for(const NetworkBank& bank, const AtomicCommand& cmd) {
  switch (kind_of(cmd)) {
    case CommandKind::sample: return bank.sample_net();
    case CommandKind::observe: return bank.observe_net();
    case CommandKind::if_gt: return bank.if_net();
    case CommandKind::assign_const: return bank.assign_const_net();
    case CommandKind::assign_var: return bank.assign_var_net();
    case CommandKind::call: return bank.call_net(std::get<Call>(cmd).proc);
  }
  throw ShapeError("unknown command kind");
}

ad::Vector with_state(const ad::Vector& features, const ad::Vector& h) {
  ad::Vector x(features.size() + h.size());
  x << features, h;
  return x;
}

}  // namespace

double observe_log_factor(const NetworkBank& bank, const Observe& cmd, const ad::Vector& h) {
  const ad::Vector x = with_state(command_features(bank, cmd), h);
  return std::clamp(bank.integrator().forward_value(x)(0), -kLogClamp, kLogClamp);
}

InferState step(const NetworkBank& bank, const AtomicCommand& cmd, InferState state) {
  const ad::Vector x = with_state(command_features(bank, cmd), state.h);
  if (kind_of(cmd) == CommandKind::observe)
    state.log_z += std::clamp(bank.integrator().forward_value(x)(0), -kLogClamp, kLogClamp);
  state.h = net_for(bank, cmd).forward_value(x);
  return state;
}

MeanFieldPosterior decode(const NetworkBank& bank, const ad::Vector& h) {
  const auto n = static_cast<Eigen::Index>(bank.dims().n);
  const ad::Vector out = bank.decoder().forward_value(h);
  MeanFieldPosterior post;
  post.mean = out.head(n);
  post.variance = out.tail(n).cwiseMax(-kLogClamp).cwiseMin(kLogClamp).array().exp();
  return post;
}

void check_compatible(const NetworkBank& bank, const Program& prog) {
  if (prog.var_count() > bank.dims().m)
    throw ShapeError("program has " + std::to_string(prog.var_count()) +
                     " variables but the bank admits at most " + std::to_string(bank.dims().m));
  if (prog.latent_count() != bank.dims().n)
    throw ShapeError("program has " + std::to_string(prog.latent_count()) +
                     " latents but the bank decodes " + std::to_string(bank.dims().n));
}

InferResult infer(const NetworkBank& bank, const Program& prog, ScanStats* stats) {
  check_compatible(bank, prog);
  InferState state = InferState::initial(bank.dims().s);
  for (const auto& cmd : prog.commands) {
    state = step(bank, cmd, std::move(state));
    if (stats) {
      ++stats->state_updates;
      if (kind_of(cmd) == CommandKind::observe) ++stats->integrations;
    }
  }
  if (stats) {
    ++stats->decodes;
    ++stats->scans;
  }
  return {decode(bank, state.h), state.log_z};
}

TapedInference infer_taped(ad::Tape& tape, NetworkBank& bank, const Program& prog) {
  check_compatible(bank, prog);
  ad::Tensor h = tape.constant(ad::Vector::Zero(static_cast<Eigen::Index>(bank.dims().s)));
  std::vector<ad::Tensor> log_factors;
  for (const auto& cmd : prog.commands) {
    ad::Tensor x = ad::concat({tape.constant(command_features(bank, cmd)), h});
    if (kind_of(cmd) == CommandKind::observe)
      log_factors.push_back(ad::clamp(bank.integrator().forward(tape, x), -kLogClamp, kLogClamp));
    ad::Mlp& net = const_cast<ad::Mlp&>(net_for(bank, cmd));
    h = net.forward(tape, x);
  }
  const auto n = static_cast<Eigen::Index>(bank.dims().n);
  ad::Tensor out = bank.decoder().forward(tape, h);
  TapedInference res;
  res.mean = ad::slice(out, 0, n);
  res.logvar = ad::clamp(ad::slice(out, n, n), -kLogClamp, kLogClamp);
  res.log_z = log_factors.empty() ? tape.constant(ad::Matrix::Zero(1, 1))
                                  : ad::sum(ad::concat(log_factors));
  return res;
}

ad::Tensor neg_log_q(const TapedInference& inf, const ad::WeightedMoments& moments) {
  return ad::gaussian_nll(inf.mean, inf.logvar, moments);
}

}  // namespace wbi
