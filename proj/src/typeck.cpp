#include "wbi/typeck.hpp"

#include <algorithm>

#include "wbi/error.hpp"

namespace wbi {

bool TypingState::in_scope(VarId v) const {
  return assigned.contains(v) || std::find(latents.begin(), latents.end(), v) != latents.end();
}

TypingState check_command(TypingState state, const AtomicCommand& cmd, std::size_t command_index,
                          std::span<const std::string> names) {
  auto name = [&](VarId v) {
    return v.index < names.size() ? names[v.index] : "#" + std::to_string(v.index);
  };
  for (VarId r : reads(cmd))
    if (!state.in_scope(r))
      throw TypeError(TypeErrorKind::use_before_define, name(r), command_index);

  VarId target;
  if (writes(cmd, &target)) {
    if (state.in_scope(target))
      throw TypeError(TypeErrorKind::reassignment, name(target), command_index);
    if (kind_of(cmd) == CommandKind::sample)
      state.latents.push_back(target);
    else
      state.assigned.insert(target);
  } else {
    state.observations.push_back(std::get<Observe>(cmd).value);
  }
  return state;
}

TypingState check_program(const Program& prog) {
  TypingState state;
  for (std::size_t i = 0; i < prog.commands.size(); ++i)
    state = check_command(std::move(state), prog.commands[i], i, prog.var_names);
  return state;
}

void annotate(Program& prog) {
  auto state = check_program(prog);
  prog.latent_order = std::move(state.latents);
  prog.obs_values = std::move(state.observations);
}

}  // namespace wbi
