#pragma once

#include <cstdint>
#include <random>

namespace psybayes {

/// SplitMix64 finalizer. Used to derive independent substream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Seedable deterministic generator.
///
/// Every variate is produced by code in this library on top of the raw
/// std::mt19937_64 stream (whose output sequence is fixed by the standard),
/// so draw sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Generator for stream `stream` of `seed` (chains, bootstrap draws, ...).
  static Rng substream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix_seed(seed, stream));
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
  }

  /// Uniform integer in [0, n) by threshold rejection (no modulo bias).
  std::uint64_t bounded(std::uint64_t n);

  /// Standard normal (Marsaglia polar method; the spare variate is cached).
  double normal();

  /// Unit-rate exponential.
  double exponential();

  /// Gamma(shape, rate = 1), Marsaglia-Tsang.
  double gamma(double shape);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace psybayes
