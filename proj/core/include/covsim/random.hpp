#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace covsim {

// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view s,
                              std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char const c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31U);
}

constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

// Top 53 bits mapped onto [0, 1).
constexpr double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11U) * 0x1.0p-53;
}

// Stable uniform draw in [0, 1) keyed by an id and a seed. Does not depend on
// any iteration order, so per-agent decisions stay reproducible when the
// population is processed in parallel or in a different order.
constexpr double keyed_uniform(std::string_view key, std::uint64_t seed) {
  return to_unit(mix(fnv1a(key), seed));
}

using rng_t = std::mt19937_64;

inline double uniform01(rng_t& rng) { return to_unit(rng()); }

// Uniform integer in [0, n) by rejection; n > 0.
inline std::uint64_t uniform_below(rng_t& rng, std::uint64_t n) {
  auto const limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = rng();
  while (x >= limit) {
    x = rng();
  }
  return x % n;
}

}  // namespace covsim
