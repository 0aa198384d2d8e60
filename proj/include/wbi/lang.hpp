#pragma once

// Abstract syntax, text format and structural analyses of the restricted
// probabilistic IR.
//
// Text format, one command per line or separated by ';':
//
//   z ~ normal(m, v)                    sample; v is the VARIANCE, not the sd
//   obs(normal(m, v), 1.5)              observe a literal value
//   obs(normal(m, v), [1.5, 2, -3])     sugar for three consecutive observes
//   x := if (a > b) c else d            guarded select
//   x := 2.5                            constant
//   x := y                              copy
//   x := p(a, b)  |  x := p(a)          procedure call
//   x := a + b    |  x := a * b         sugar for add(a, b) and mul(a, b)
//
// `//` starts a comment that runs to the end of the line.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wbi/procedures.hpp"

namespace wbi {

/// Slot of a variable inside its program, in [0, var_count).
struct VarId {
  std::uint32_t index = 0;
  friend auto operator<=>(VarId, VarId) = default;
};

struct Sample {
  VarId target, mean, variance;
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Observe {
  VarId mean, variance;
  double value = 0.0;
  friend bool operator==(const Observe&, const Observe&) = default;
};

/// target := if (lhs > rhs) then_var else else_var
struct IfGt {
  VarId target, lhs, rhs, then_var, else_var;
  friend bool operator==(const IfGt&, const IfGt&) = default;
};

struct AssignConst {
  VarId target;
  double value = 0.0;
  friend bool operator==(const AssignConst&, const AssignConst&) = default;
};

struct AssignVar {
  VarId target, source;
  friend bool operator==(const AssignVar&, const AssignVar&) = default;
};

/// target := proc(args...). `args` has one or two entries.
struct Call {
  VarId target;
  std::string proc;
  std::vector<VarId> args;
  friend bool operator==(const Call&, const Call&) = default;
};

using AtomicCommand = std::variant<Sample, Observe, IfGt, AssignConst, AssignVar, Call>;

enum class CommandKind { sample, observe, if_gt, assign_const, assign_var, call };

inline CommandKind kind_of(const AtomicCommand& cmd) {
  return static_cast<CommandKind>(cmd.index());
}

/// Variables read by a command, in argument order.
std::vector<VarId> reads(const AtomicCommand& cmd);

/// Variable written by a command, if any (observe writes nothing).
bool writes(const AtomicCommand& cmd, VarId* target);

struct Program {
  std::vector<AtomicCommand> commands;
  std::vector<std::string> var_names;
  /// Latent variables in sampling order; filled by the type checker.
  std::vector<VarId> latent_order;
  /// Observed values in command order; filled by the type checker.
  std::vector<double> obs_values;

  std::size_t var_count() const { return var_names.size(); }
  std::size_t latent_count() const { return latent_order.size(); }
  std::size_t observe_count() const { return obs_values.size(); }
  const std::string& name(VarId v) const { return var_names.at(v.index); }

  friend bool operator==(const Program&, const Program&) = default;
};

/// Parses and type-checks program text. Throws SyntaxError for malformed text
/// or unknown/ill-applied procedures, and TypeError for scoping violations.
Program parse(std::string_view text,
              const ProcedureRegistry& registry = ProcedureRegistry::builtin());

/// Parses without type-checking; `latent_order` and `obs_values` stay empty.
Program parse_syntax(std::string_view text,
                     const ProcedureRegistry& registry = ProcedureRegistry::builtin());

/// Prints a program so that print(parse(print(p))) == print(p). parse numbers
/// variables by first appearance, so parse(print(p)) == p holds exactly when p
/// does too; canonical programs come back via canonicalise. Reals are written
/// in their shortest round-tripping decimal form.
std::string print(const Program& prog);
std::string print(const Program& prog, const AtomicCommand& cmd);

/// Shortest decimal text that reads back as exactly `x`.
std::string format_real(double x);

/// Stable 64-bit FNV-1a hash of the printed program.
std::uint64_t program_hash(const Program& prog);

/// Data-flow graph. Nodes [0, var_count) are variables; node var_count + j is
/// the j-th observation. Edge u -> w iff u is read by the command defining w
/// (or by the j-th observe, for observation nodes).
struct DependencyGraph {
  std::size_t var_count = 0;
  std::size_t obs_count = 0;
  std::vector<std::vector<std::size_t>> children;  // sorted, unique
  std::vector<std::vector<std::size_t>> parents;   // sorted, unique

  std::size_t node_count() const { return var_count + obs_count; }
  bool has_edge(std::size_t from, std::size_t to) const;
  std::size_t edge_count() const;
  bool is_acyclic() const;
};

DependencyGraph dependency_graph(const Program& prog);

/// The part of the graph that carries randomness: latent variables,
/// deterministic variables downstream of a latent, and observation nodes.
/// Returns node ids of the full graph in ascending order.
std::vector<std::size_t> random_nodes(const Program& prog, const DependencyGraph& g);

/// Renames variables to z0, z1, ... (latents) and v0, v1, ... (everything
/// else) in breadth-first order of the dependency graph. Sources are visited
/// first, ordered by the index of their defining command; children of a node
/// are enqueued in the order of their defining commands. Latents get slots
/// [0, n) and the remaining variables [n, m), so a variable's slot is its
/// position in that order. Command order is preserved.
Program canonicalise(const Program& prog);

/// One-hot encoding of `v` as a vector of length `m`.
std::vector<double> one_hot(VarId v, std::size_t m);

}  // namespace wbi
