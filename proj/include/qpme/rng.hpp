#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace qpme {

/// Seeded random stream with a platform-independent output sequence.
///
/// The engine is std::mt19937_64 seeded through std::seed_seq with the four
/// 32-bit halves of (seed, stream); both are fully specified by the standard.
/// Uniform doubles take the top 53 bits of one engine draw; normals use the
/// Box-Muller transform with the second variate cached. The distribution
/// classes of the standard library are avoided because their output differs
/// between implementations.
///
/// Substreams: worker k of a run seeded with s uses Rng(s, k + 1); stream 0 is
/// reserved for the owning training loop.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Text snapshot of the full generator state (engine plus cached normal).
  std::string state() const;
  void set_state(const std::string& text);

  bool operator==(const Rng& other) const;

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace qpme
