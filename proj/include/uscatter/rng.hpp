#pragma once

#include <cstdint>

namespace uscatter {

/// SplitMix64 (Steele, Lea, Flood 2014). All randomness in uscatter derives
/// from one 64-bit seed through this generator so runs reproduce bit for bit
/// in any language.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) from the top 53 bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Independent stream for a named purpose: seed ^ tag, then one warm-up draw.
  static SplitMix64 stream(std::uint64_t seed, std::uint64_t tag) noexcept {
    SplitMix64 g(seed ^ (tag * 0xD1B54A32D192ED03ULL));
    g.next();
    return g;
  }

 private:
  std::uint64_t state_;
};

}  // namespace uscatter
