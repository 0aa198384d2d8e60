#include "wbi/semantics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "wbi/error.hpp"

namespace wbi {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double call_proc(const ProcedureRegistry& reg, const Call& c, const std::vector<double>& vals) {
  const Procedure& p = reg.at(c.proc);
  const double a = vals[c.args[0].index];
  const double b = c.args.size() > 1 ? vals[c.args[1].index] : 0.0;
  return p.fn(a, b);
}

struct ForwardResult {
  LogDensity density;
  std::optional<std::size_t> failed_at;  // first command with a non-finite value
};

// Single left-to-right pass that fills `vals` and accumulates log factors.
ForwardResult forward(const Program& prog, std::span<const double> z, std::vector<double>& vals,
                      const ProcedureRegistry& reg) {
  vals.assign(prog.var_count(), 0.0);
  ForwardResult res;
  std::size_t next_latent = 0;
  for (std::size_t i = 0; i < prog.commands.size(); ++i) {
    const auto& cmd = prog.commands[i];
    double produced = 0.0;
    std::visit(overloaded{
                   [&](const Sample& c) {
                     if (next_latent >= z.size())
                       throw ShapeError("latent vector too short for program");
                     const double x = z[next_latent++];
                     vals[c.target.index] = x;
                     const double t = log_gauss_term(x, vals[c.mean.index], vals[c.variance.index]);
                     res.density.prior += t;
                     produced = x + t;
                   },
                   [&](const Observe& c) {
                     const double t =
                         log_gauss_term(c.value, vals[c.mean.index], vals[c.variance.index]);
                     res.density.likelihood += t;
                     produced = t;
                   },
                   [&](const IfGt& c) {
                     produced = vals[c.lhs.index] > vals[c.rhs.index] ? vals[c.then_var.index]
                                                                      : vals[c.else_var.index];
                     vals[c.target.index] = produced;
                   },
                   [&](const AssignConst& c) { produced = vals[c.target.index] = c.value; },
                   [&](const AssignVar& c) {
                     produced = vals[c.target.index] = vals[c.source.index];
                   },
                   [&](const Call& c) {
                     produced = vals[c.target.index] = call_proc(reg, c, vals);
                   },
               },
               cmd);
    if (!std::isfinite(produced) && !res.failed_at) res.failed_at = i;
  }
  if (next_latent != z.size()) throw ShapeError("latent vector length does not match program");
  return res;
}

}  // namespace

double log_gauss_term(double a, double b, double c) {
  if (!(c > 0.0)) return c <= 0.0 ? 0.0 : kNaN;
  const double d = a - b;
  return -kLogSqrt2Pi - 0.5 * std::log(c) - 0.5 * d * d / c;
}

double gauss_density_term(double a, double b, double c) {
  if (c <= 0.0) return 1.0;
  return std::exp(log_gauss_term(a, b, c));
}

LogDensity log_density_parts(const Program& prog, std::span<const double> z,
                             const ProcedureRegistry& reg) {
  std::vector<double> vals;
  auto res = forward(prog, z, vals, reg);
  if (res.failed_at) throw NumericError("non-finite density value", *res.failed_at);
  return res.density;
}

double log_density(const Program& prog, std::span<const double> z, const ProcedureRegistry& reg) {
  return log_density_parts(prog, z, reg).total();
}

std::vector<double> valuation(const Program& prog, std::span<const double> z,
                              const ProcedureRegistry& reg) {
  std::vector<double> vals;
  forward(prog, z, vals, reg);
  return vals;
}

double log_density_and_grad(const Program& prog, std::span<const double> z, std::span<double> grad,
                            const ProcedureRegistry& reg) {
  std::vector<double> vals;
  auto res = forward(prog, z, vals, reg);
  std::fill(grad.begin(), grad.end(), 0.0);
  if (res.failed_at) return kNaN;

  // Reverse sweep. d log N(a; b, c) / d(a, b, c) for c > 0.
  auto term_grad = [](double a, double b, double c, double& da, double& db, double& dc) {
    const double d = a - b;
    da = -d / c;
    db = d / c;
    dc = -0.5 / c + 0.5 * d * d / (c * c);
  };
  std::vector<double> adj(prog.var_count(), 0.0);
  std::size_t latent = z.size();
  for (std::size_t i = prog.commands.size(); i-- > 0;) {
    std::visit(overloaded{
                   [&](const Sample& c) {
                     --latent;
                     double total = adj[c.target.index];
                     const double var = vals[c.variance.index];
                     if (var > 0.0) {
                       double da, db, dc;
                       term_grad(vals[c.target.index], vals[c.mean.index], var, da, db, dc);
                       total += da;
                       adj[c.mean.index] += db;
                       adj[c.variance.index] += dc;
                     }
                     grad[latent] = total;
                   },
                   [&](const Observe& c) {
                     const double var = vals[c.variance.index];
                     if (var > 0.0) {
                       double da, db, dc;
                       term_grad(c.value, vals[c.mean.index], var, da, db, dc);
                       adj[c.mean.index] += db;
                       adj[c.variance.index] += dc;
                     }
                   },
                   [&](const IfGt& c) {
                     const bool take = vals[c.lhs.index] > vals[c.rhs.index];
                     adj[(take ? c.then_var : c.else_var).index] += adj[c.target.index];
                   },
                   [&](const AssignConst&) {},
                   [&](const AssignVar& c) { adj[c.source.index] += adj[c.target.index]; },
                   [&](const Call& c) {
                     const double up = adj[c.target.index];
                     if (up == 0.0) return;
                     const Procedure& p = reg.at(c.proc);
                     const double a = vals[c.args[0].index];
                     const double b = c.args.size() > 1 ? vals[c.args[1].index] : 0.0;
                     auto g = p.grad(a, b);
                     adj[c.args[0].index] += up * g[0];
                     if (c.args.size() > 1) adj[c.args[1].index] += up * g[1];
                   },
               },
               prog.commands[i]);
  }
  for (double g : grad)
    if (!std::isfinite(g)) return kNaN;
  return res.density.total();
}

std::vector<double> grad_log_density(const Program& prog, std::span<const double> z,
                                     const ProcedureRegistry& reg) {
  std::vector<double> grad(z.size());
  std::vector<double> vals;
  auto res = forward(prog, z, vals, reg);
  if (res.failed_at) throw NumericError("non-finite density value", *res.failed_at);
  if (!std::isfinite(log_density_and_grad(prog, z, grad, reg)))
    throw NumericError("non-finite gradient");
  return grad;
}

Simulation simulate(const Program& prog, Rng& rng, const ClippedUniformOverrides& overrides,
                    const ProcedureRegistry& reg) {
  Simulation sim;
  std::vector<double> vals(prog.var_count(), 0.0);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < prog.commands.size(); ++i) {
    auto draw = [&](double mean, double var) {
      if (!(var > 0.0)) throw NumericError("cannot sample with non-positive variance", i);
      return mean + std::sqrt(var) * normal(rng);
    };
    std::visit(overloaded{
                   [&](const Sample& c) {
                     const double mean = vals[c.mean.index];
                     const double var = vals[c.variance.index];
                     double x;
                     if (auto it = overrides.find(c.target.index); it != overrides.end()) {
                       if (!(var > 0.0))
                         throw NumericError("cannot sample with non-positive variance", i);
                       const double half = it->second * std::sqrt(var);
                       x = std::uniform_real_distribution<double>(mean - half, mean + half)(rng);
                     } else {
                       x = draw(mean, var);
                     }
                     vals[c.target.index] = x;
                     sim.latents.push_back(x);
                   },
                   [&](const Observe& c) {
                     sim.observations.push_back(draw(vals[c.mean.index], vals[c.variance.index]));
                   },
                   [&](const IfGt& c) {
                     vals[c.target.index] = vals[c.lhs.index] > vals[c.rhs.index]
                                                ? vals[c.then_var.index]
                                                : vals[c.else_var.index];
                   },
                   [&](const AssignConst& c) { vals[c.target.index] = c.value; },
                   [&](const AssignVar& c) { vals[c.target.index] = vals[c.source.index]; },
                   [&](const Call& c) { vals[c.target.index] = call_proc(reg, c, vals); },
               },
               prog.commands[i]);
  }
  return sim;
}

Program with_observations(Program prog, std::span<const double> obs) {
  std::size_t j = 0;
  for (auto& cmd : prog.commands)
    if (auto* o = std::get_if<Observe>(&cmd)) {
      if (j >= obs.size()) throw ShapeError("too few observations for program");
      o->value = obs[j++];
    }
  if (j != obs.size()) throw ShapeError("too many observations for program");
  prog.obs_values.assign(obs.begin(), obs.end());
  return prog;
}

// ---------------------------------------------------------------------------
// Batched evaluation: one pass over the commands, each applied to a column of
// values (one per sample).

namespace {

using Column = std::vector<double>;

void apply_deterministic(const AtomicCommand& cmd, std::vector<Column>& cols, std::size_t rows,
                         const ProcedureRegistry& reg) {
  std::visit(overloaded{
                 [&](const IfGt& c) {
                   auto& out = cols[c.target.index];
                   out.resize(rows);
                   const auto &l = cols[c.lhs.index], &r = cols[c.rhs.index],
                              &t = cols[c.then_var.index], &e = cols[c.else_var.index];
                   for (std::size_t k = 0; k < rows; ++k) out[k] = l[k] > r[k] ? t[k] : e[k];
                 },
                 [&](const AssignConst& c) { cols[c.target.index].assign(rows, c.value); },
                 [&](const AssignVar& c) { cols[c.target.index] = cols[c.source.index]; },
                 [&](const Call& c) {
                   const Procedure& p = reg.at(c.proc);
                   auto& out = cols[c.target.index];
                   out.resize(rows);
                   const auto& a = cols[c.args[0].index];
                   if (c.args.size() > 1) {
                     const auto& b = cols[c.args[1].index];
                     for (std::size_t k = 0; k < rows; ++k) out[k] = p.fn(a[k], b[k]);
                   } else {
                     for (std::size_t k = 0; k < rows; ++k) out[k] = p.fn(a[k], 0.0);
                   }
                 },
                 [](const auto&) {},
             },
             cmd);
}

void add_observe_terms(const Observe& c, const std::vector<Column>& cols, std::vector<double>& acc) {
  const auto &m = cols[c.mean.index], &v = cols[c.variance.index];
  for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += log_gauss_term(c.value, m[k], v[k]);
}

void poison_nonfinite(std::vector<double>& a, std::vector<double>& b) {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!std::isfinite(a[k]) || !std::isfinite(b[k])) a[k] = b[k] = kNaN;
}

}  // namespace

void log_density_batch(const Program& prog, const SampleMatrix& z, std::vector<double>& log_prior,
                       std::vector<double>& log_likelihood, ScanStats* stats,
                       const ProcedureRegistry& reg) {
  const auto rows = static_cast<std::size_t>(z.rows());
  if (static_cast<std::size_t>(z.cols()) != prog.latent_count())
    throw ShapeError("sample matrix width does not match latent count");
  std::vector<Column> cols(prog.var_count());
  log_prior.assign(rows, 0.0);
  log_likelihood.assign(rows, 0.0);
  std::size_t latent = 0;
  for (const auto& cmd : prog.commands) {
    if (const auto* s = std::get_if<Sample>(&cmd)) {
      auto& out = cols[s->target.index];
      out.resize(rows);
      const auto &m = cols[s->mean.index], &v = cols[s->variance.index];
      for (std::size_t k = 0; k < rows; ++k) {
        out[k] = z(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(latent));
        log_prior[k] += log_gauss_term(out[k], m[k], v[k]);
      }
      ++latent;
    } else if (const auto* o = std::get_if<Observe>(&cmd)) {
      add_observe_terms(*o, cols, log_likelihood);
    } else {
      apply_deterministic(cmd, cols, rows, reg);
    }
  }
  poison_nonfinite(log_prior, log_likelihood);
  if (stats) ++stats->scans;
}

void simulate_prior_batch(const Program& prog, std::size_t count, Rng& rng, SampleMatrix& z,
                          std::vector<double>& log_likelihood, ScanStats* stats,
                          const ProcedureRegistry& reg) {
  const std::size_t n = prog.latent_count();
  z.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(n));
  std::vector<Column> cols(prog.var_count());
  log_likelihood.assign(count, 0.0);
  std::vector<double> dummy(count, 0.0);
  std::normal_distribution<double> normal;
  std::size_t latent = 0;
  for (const auto& cmd : prog.commands) {
    if (const auto* s = std::get_if<Sample>(&cmd)) {
      auto& out = cols[s->target.index];
      out.resize(count);
      const auto &m = cols[s->mean.index], &v = cols[s->variance.index];
      for (std::size_t k = 0; k < count; ++k) {
        out[k] = v[k] > 0.0 ? m[k] + std::sqrt(v[k]) * normal(rng) : kNaN;
        z(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(latent)) = out[k];
      }
      ++latent;
    } else if (const auto* o = std::get_if<Observe>(&cmd)) {
      add_observe_terms(*o, cols, log_likelihood);
    } else {
      apply_deterministic(cmd, cols, count, reg);
    }
  }
  // Rows whose latents are not finite carry no weight.
  for (std::size_t k = 0; k < count; ++k)
    for (std::size_t j = 0; j < n; ++j)
      if (!std::isfinite(z(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j))))
        dummy[k] = kNaN;
  poison_nonfinite(dummy, log_likelihood);
  if (stats) ++stats->scans;
}

std::vector<std::size_t> lint_nonpositive_variances(const Program& prog) {
  std::vector<std::optional<double>> constant(prog.var_count());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < prog.commands.size(); ++i) {
    const auto& cmd = prog.commands[i];
    if (const auto* c = std::get_if<AssignConst>(&cmd)) constant[c->target.index] = c->value;
    if (const auto* c = std::get_if<AssignVar>(&cmd)) constant[c->target.index] = constant[c->source.index];
    VarId var{};
    bool check = false;
    if (const auto* s = std::get_if<Sample>(&cmd)) var = s->variance, check = true;
    if (const auto* o = std::get_if<Observe>(&cmd)) var = o->variance, check = true;
    if (check && constant[var.index] && *constant[var.index] <= 0.0) out.push_back(i);
  }
  return out;
}

}  // namespace wbi
