#pragma once

// Random program generators. A class type is data: a table of uniformly
// drawn parameters, a program template whose `{k}` holes receive parameter k
// (1-based), and optional clipped-uniform draws used only while simulating
// the observations.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wbi/lang.hpp"

namespace wbi {

struct ThetaSpec {
  double lo = 0.0;
  double hi = 1.0;
  bool squared = false;  // the template receives theta^2
};

struct ClassSpec {
  std::string name;
  int type = 0;  // 0 for single-type classes
  std::vector<ThetaSpec> theta;
  std::string program_template;
  /// Variable name -> k: during simulation that latent is drawn from
  /// U(mean - k sqrt(var), mean + k sqrt(var)).
  std::map<std::string, double> overrides;

  std::string label() const;  // "gauss", "ext1/5", ...
};

/// Registered class names, in a fixed order.
std::vector<std::string> class_names();
/// All types of a class, in type order. Throws Error for an unknown class.
std::vector<ClassSpec> class_specs(const std::string& name);
/// One type of a class (type 0 or 1 for single-type classes).
ClassSpec class_spec(const std::string& name, int type = 0);
/// ext1 type for nl position i in 1..3 and dependency graph j in 1..4.
int ext1_type(int position, int graph);

ClassSpec class_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ClassSpec& spec);

/// Template text with holes filled by `theta` (already squared where
/// requested) and all observed values 0.
std::string instantiate(const ClassSpec& spec, const std::vector<double>& theta);

struct GeneratedProgram {
  Program program;              // canonical, with simulated observations
  std::string class_label;
  int type = 0;
  std::uint64_t seed = 0;
  std::vector<double> theta;    // values substituted into the template
  std::vector<double> latents;  // simulated latents in sampling order (debug only)
};

/// Deterministic in (spec, seed).
GeneratedProgram generate(const ClassSpec& spec, std::uint64_t seed);

struct GeneratedCorpus {
  std::vector<GeneratedProgram> train;
  std::vector<GeneratedProgram> test;
};

/// Draws `train_count` programs from `train_types` and `test_count` from
/// `test_types`, cycling through the types in order. Every program has its
/// own derived seed and the printed programs are pairwise distinct. When
/// `disjoint_types` is set, a type may not appear in both lists (Error).
GeneratedCorpus generate_corpus(const std::vector<ClassSpec>& train_types,
                                const std::vector<ClassSpec>& test_types, std::size_t train_count,
                                std::size_t test_count, std::uint64_t seed,
                                bool disjoint_types = false);

}  // namespace wbi
