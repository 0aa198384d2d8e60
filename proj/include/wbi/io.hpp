#pragma once

// Binary artifacts. All integers and reals are little-endian.
//
// Sample cache:
//   char[8]  "WBICACHE"
//   u32      version (1)
//   u64      program hash
//   u64      n, u64 M
//   u32      proposal tag (prior 0, predicted 1, lais 2, hmc 3, exact 4)
//   u64      seed
//   f64[M*n] latents, row-major
//   f64[M]   log-weights
//   f64      N-hat, f64 log N-hat
//
// Checkpoint:
//   char[8]  "WBICKPT1"
//   u64      manifest length L
//   char[L]  JSON manifest: dims, scaling, procedures, array directory
//            (name, rows, cols, offset in f64 elements) and a caller "meta"
//   f64[]    parameter data, column-major per array

#include <cstdint>
#include <string>

#include <json.hpp>

#include "wbi/samplers.hpp"
#include "wbi/whitebox.hpp"

namespace wbi {

struct SampleCache {
  std::uint64_t program_hash = 0;
  WeightedSampleSet set;
};

void write_cache(const std::string& path, const SampleCache& cache);
SampleCache read_cache(const std::string& path);

/// Serialised checkpoint bytes; identical banks and meta give identical bytes.
std::string checkpoint_bytes(const NetworkBank& bank, const nlohmann::json& meta = {});
void save_checkpoint(const std::string& path, const NetworkBank& bank,
                     const nlohmann::json& meta = {});
/// Loads a bank. When `meta` is given it receives the stored meta object.
NetworkBank load_checkpoint(const std::string& path, nlohmann::json* meta = nullptr);
NetworkBank checkpoint_from_bytes(const std::string& bytes, nlohmann::json* meta = nullptr);

/// Reads a whole file; throws FormatError if it cannot be opened.
std::string read_file(const std::string& path);
/// Writes bytes to a file, replacing it.
void write_file(const std::string& path, const std::string& bytes);

}  // namespace wbi
