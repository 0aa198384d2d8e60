#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "wbi/lang.hpp"

namespace wbi {

struct VarIdHash {
  std::size_t operator()(VarId v) const noexcept { return v.index; }
};

/// The (S, V, alpha) triple threaded through type checking: latents sampled
/// so far in order, variables assigned by non-sample commands, and the
/// observed values so far.
struct TypingState {
  std::vector<VarId> latents;
  std::unordered_set<VarId, VarIdHash> assigned;
  std::vector<double> observations;

  bool in_scope(VarId v) const;
};

/// Applies the typing rule of one command. `names` (optional) is used for
/// diagnostics. Throws TypeError naming `command_index`.
TypingState check_command(TypingState state, const AtomicCommand& cmd, std::size_t command_index,
                          std::span<const std::string> names = {});

/// Left-to-right fold of check_command from the empty state.
TypingState check_program(const Program& prog);

/// Type-checks `prog` and stores the resulting latent order and observations.
void annotate(Program& prog);

}  // namespace wbi
