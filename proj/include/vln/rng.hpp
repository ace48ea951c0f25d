#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace vln {

using Rng = std::mt19937_64;

// Child seed for a named consumer of a root seed. Every random stream in the
// project is derived this way (world, grammar, init, training, sampling), so
// consumers never share a stream by accident.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t root, std::string_view label, std::uint64_t index = 0) {
  return Rng(derive_seed(root, label, index));
}

// Uniform in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Uniform integer in [0, n). Lemire-style rejection keeps it unbiased.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

// Fisher-Yates permutation of 0..n-1 built on uniform_index.
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

// Stateless 64-bit mix of several words, for hash-seeded features.
std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                       std::uint64_t d = 0);

}  // namespace vln
