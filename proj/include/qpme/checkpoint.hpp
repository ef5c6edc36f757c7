#pragma once

// Binary parameter checkpoints.
//
// Layout (all integers and floats little-endian):
//   "QPMECKP1"                    magic
//   u32 version (1)
//   u64 seed, u64 step
//   u32 network count; per network: u32 input_dim, u32 depth, depth x u32
//       widths, u32 activation
//   u64 length + bytes            metadata (JSON text)
//   u64 count + count x f64       parameters
//   u8 optimizer flag; when 1:
//       u64 adam step, f64 beta1, beta2, eps, lr, count x f64 m, count x f64 v,
//       u64 length + bytes        RNG state text
//   u64 FNV-1a hash of every preceding byte

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qpme/mlp.hpp"

namespace qpme {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr = 1e-3;

  static AdamState fresh(std::size_t n, double lr);
  bool operator==(const AdamState&) const = default;
};

struct OptimizerSnapshot {
  AdamState adam;
  std::string rng_state;
  bool operator==(const OptimizerSnapshot&) const = default;
};

struct Checkpoint {
  std::vector<MlpSpec> nets;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::string meta;
  ParamVector params;
  std::optional<OptimizerSnapshot> optimizer;

  bool operator==(const Checkpoint&) const = default;
};

std::uint64_t fnv1a(std::string_view bytes);

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws IoError on a bad magic, truncation, trailing bytes or hash mismatch.
Checkpoint decode_checkpoint(std::string_view bytes);

/// Writes to a sibling temporary file and renames it over `path`.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes text through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace qpme
