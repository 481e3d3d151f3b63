#pragma once

#include <cmath>
#include <cstdint>

namespace grasspca {

// 64-bit counter-based generator (SplitMix64): the state is a plain counter
// advanced by a fixed odd increment and every output is a bijective hash of
// it. Streams never share state, so any (seed, stream, index) tuple can be
// opened independently and in any order without affecting other draws.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : counter_(key) {}

  std::uint64_t next() {
    std::uint64_t z = (counter_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_open() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  // Unbiased uniform integer in [0, bound) via rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = ~0ULL - ~0ULL % bound;
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return v % bound;
  }

  // Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double gaussian() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t counter_;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Folds (seed, stream labels, indices...) into an independent stream key.
inline std::uint64_t rng_key(std::uint64_t seed) { return detail::mix64(seed + 0x9E3779B97F4A7C15ULL); }

template <typename... Rest>
std::uint64_t rng_key(std::uint64_t seed, std::uint64_t part, Rest... rest) {
  return rng_key(detail::mix64(seed ^ (part + 0x9E3779B97F4A7C15ULL)), rest...);
}

// Stream labels used across the project; one label per independent purpose.
namespace streams {
inline constexpr std::uint64_t kClientSampling = 1;
inline constexpr std::uint64_t kInitClient = 2;
inline constexpr std::uint64_t kInitConsensus = 3;
inline constexpr std::uint64_t kColumnRecovery = 4;
inline constexpr std::uint64_t kSynthPlanted = 5;
inline constexpr std::uint64_t kSynthTrain = 6;
inline constexpr std::uint64_t kSynthTest = 7;
inline constexpr std::uint64_t kShuffle = 8;
inline constexpr std::uint64_t kHoldout = 9;
inline constexpr std::uint64_t kEigInit = 10;
}  // namespace streams

}  // namespace grasspca
