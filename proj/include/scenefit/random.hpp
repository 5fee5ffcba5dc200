#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace scenefit {

// All randomness in the library flows through these helpers so that runs are
// reproducible bit-for-bit from a single seed. Distribution mapping is done
// by hand because std::uniform_real_distribution is implementation-defined.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Independent stream for (seed, salt); salts keep unrelated consumers
/// (selection, per-epoch init, scene generation) decorrelated.
inline std::mt19937_64 seeded_rng(std::uint64_t seed, std::uint64_t salt = 0) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(salt)));
}

/// Uniform double in [0, 1) from the top 53 bits of the generator output.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n). Modulo bias is below 2^-53 for any n that
/// occurs here (candidate counts, shape ids), far under test tolerances.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  return rng() % n;
}

/// Standard normal via Box-Muller, hand-rolled for the same reproducibility
/// reason as uniform01 (std::normal_distribution is implementation-defined).
inline double normal01(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
}

}  // namespace scenefit
