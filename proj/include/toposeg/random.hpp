#pragma once

// Counter-based random numbers: every draw is a pure function of a seed and
// an index tuple, so results do not depend on draw order or thread count.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string_view>

namespace toposeg::rng {

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t key(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) {
  std::uint64_t h = mix64(seed);
  for (auto c : counters) h = mix64(h ^ mix64(c));
  return h;
}

/// 64-bit FNV-1a, used to fold string ids into keys.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Uniform in [0, 1) with 53 random bits.
constexpr double uniform01(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

inline double uniform(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) {
  return uniform01(key(seed, counters));
}

/// Standard normal by Box-Muller from two keyed uniforms.
inline double standard_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const double u1 = 1.0 - uniform(seed, {a, b, c, 0});  // (0, 1]
  const double u2 = uniform(seed, {a, b, c, 1});
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace toposeg::rng
