#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace eqa {

// Seeded generator with distribution helpers that do not depend on the
// standard library's implementation-defined distributions, so streams are
// reproducible across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t uniform_int(uint64_t n);

  // Standard normal via Box-Muller.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finalizer; used to derive independent child seeds.
uint64_t mix_seed(uint64_t a, uint64_t b);

// FNV-1a 64-bit hash of a byte string.
uint64_t fnv1a64(std::string_view bytes);

}  // namespace eqa
