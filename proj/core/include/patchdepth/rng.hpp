#pragma once

#include <cstdint>

namespace patchdepth {

// splitmix64. Small, fast, and identical on every platform, which is what we
// need for reproducible sampling; quality is plenty for jittering scenes and
// filling keypoint budgets.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, bound) via rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = bound * ((~0ull) / bound);
    std::uint64_t r;
    do {
      r = next();
    } while (r >= limit);
    return r % bound;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // Uniform double in [lo, hi).
  double next_in(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Independent child stream, so consumers can draw without perturbing the
  // parent sequence.
  SplitMix64 split() { return SplitMix64(next() ^ 0x5851f42d4c957f2dull); }

 private:
  std::uint64_t state_;
};

}  // namespace patchdepth
