#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dpawno {

/// Purposes that draw randomness; each gets an independent stream from the root seed.
enum class Stream : std::uint64_t { data = 1, init = 2, shuffle = 3, grf = 4, test = 5 };

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Counter-based derivation: seed for (root, purpose, index).
inline std::uint64_t derive_seed(std::uint64_t root, Stream purpose, std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ splitmix64(static_cast<std::uint64_t>(purpose))) + index);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t root, Stream purpose, std::uint64_t index = 0) {
  return Rng(derive_seed(root, purpose, index));
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace dpawno
