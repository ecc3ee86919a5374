#pragma once

#include <cstdint>
#include <random>

namespace geb {

// All randomness flows through caller-owned engines so that parallel runs
// use independent streams and reruns with the same seed are bit-identical.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Derives a child seed for an independent stream (run index, mode index...).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
  Rng mix(master ^ (0x9e3779b97f4a7c15ULL * (salt + 1)));
  return mix();
}

}  // namespace geb
