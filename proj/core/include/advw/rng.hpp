#pragma once

#include <cstdint>

namespace advw {

// Deterministic xorshift64* generator shared by dataset generation, splits,
// parameter init and batch shuffling. The update is
//   x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27;
// and the output is x * 0x2545F4914F6CDD1D. A zero seed is remapped to
// 0x9E3779B97F4A7C15 because the xorshift state must never be zero.
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : state_(seed == 0 ? 0x9E3779B97F4A7C15ULL : seed) {}

  std::uint64_t next_u64() {
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545F4914F6CDD1DULL;
  }

  // Uniform in [0, 1) from the top 53 bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n) by modulo reduction; n must be positive.
  // The modulo bias is irrelevant at the scales used here and keeps the
  // sequence trivial to reproduce in other implementations.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

// Derives a stream seed from (seed, stream index), e.g. one stream per
// training epoch. mix(seed, k) = seed XOR (k + 1) * 0x9E3779B97F4A7C15.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return seed ^ ((stream + 1) * 0x9E3779B97F4A7C15ULL);
}

}  // namespace advw
