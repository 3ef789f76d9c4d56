#pragma once

#include <cstdint>
#include <random>

namespace decnash {

/// Deterministic uniform draws on top of mt19937_64. std::uniform_real_distribution
/// is implementation-defined, so the double scaling is done by hand to keep
/// results reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace decnash
