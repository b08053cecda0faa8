#pragma once

#include <cstdint>
#include <random>

// Deterministic random helpers. std::uniform_*_distribution output is
// implementation-defined, so everything that must reproduce bit for bit
// draws through these instead.

namespace attriflip {

using Rng = std::mt19937_64;

// splitmix64; used to derive independent per-item seeds from a run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform in [0, 1).
inline double rand_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform in [lo, hi).
inline double rand_range(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * rand_unit(rng);
}

// Uniform integer in [lo, hi] (modulo bias is irrelevant here; determinism
// is what matters).
inline int rand_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

template <typename T>
void shuffle_deterministic(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace attriflip
