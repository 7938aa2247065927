#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cadrepair {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Labeled seed splitting: independent streams for (master, purpose, index).
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index = 0);

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace cadrepair
