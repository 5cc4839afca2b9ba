#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>

namespace restyle {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// One splitmix64 step from state `x`: advance by the golden gamma, then
/// apply the output finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += kGoldenGamma;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for the i-th child stream of `base`. Order independent, so parallel
/// workers can derive their seeds without coordination.
constexpr std::uint64_t mix(std::uint64_t base, std::uint64_t i) {
  return splitmix64(base ^ (i * kGoldenGamma));
}

/// xoshiro256** seeded from four consecutive splitmix64 outputs.
class Rng {
 public:
  explicit constexpr Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) {
      word = splitmix64(s);
      s += kGoldenGamma;
    }
  }

  constexpr std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n); n must be positive.
  std::size_t below(std::size_t n) {
    auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  /// Geometric on {1, 2, ...} with the given mean (>= 1), by inversion.
  std::size_t geometric(double mean) {
    const double u = uniform();
    if (mean <= 1.0) return 1;
    const double p = 1.0 / mean;
    return 1 + static_cast<std::size_t>(std::floor(std::log1p(-u) / std::log1p(-p)));
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_{};
};

}  // namespace restyle
