#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace wbi {

using Rng = std::mt19937_64;

/// Derives an independent stream from a root seed and a path of stage or
/// item indices, e.g. `derive_rng(seed, {stage::refsample, program_index})`.
inline Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size());
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto p : path) push(p);
  std::seed_seq s(words.begin(), words.end());
  return Rng(s);
}

/// Stage tags used in seed derivation so that the pipeline stages never share
/// a random stream.
namespace stage {
inline constexpr std::uint64_t generate = 1;
inline constexpr std::uint64_t refsample = 2;
inline constexpr std::uint64_t init = 3;
inline constexpr std::uint64_t train = 4;
inline constexpr std::uint64_t bench = 5;
inline constexpr std::uint64_t split = 6;
}  // namespace stage

}  // namespace wbi
