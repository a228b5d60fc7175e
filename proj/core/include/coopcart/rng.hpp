#pragma once

#include <cstdint>
#include <random>

namespace coopcart {

/// Deterministic PRNG wrapper. All stochastic pieces of the engine draw
/// through this class instead of the <random> distributions, so that a run
/// is reproducible bit-for-bit from its seed regardless of the standard
/// library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection-sampled, so it is exactly uniform.
  std::uint64_t uniform_index(std::uint64_t n);

  std::uint64_t next_u64() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

/// Derives an independent seed for a named stream of a run. Components
/// (environment resets, per-agent action noise, per-agent training draws)
/// each own a stream so their consumption patterns cannot interfere.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t stream);

}  // namespace coopcart
