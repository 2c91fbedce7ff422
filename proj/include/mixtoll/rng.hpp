#pragma once

// Seeded generator used for every random draw in the library: std::mt19937_64
// (fully specified by the C++ standard) with doubles built from the top 53
// bits, so sequences are identical on every platform.

#include <cstdint>
#include <random>

namespace mixtoll {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mixtoll
