#pragma once

// Portable draws on top of std::mt19937_64. The standard distributions are
// implementation-defined, so anything that must be reproducible byte for
// byte across toolchains goes through these helpers instead.

#include <cstdint>
#include <random>
#include <vector>

#include "expire_treap/expiration.hpp"

namespace expire_treap {

using Rng = std::mt19937_64;

/// Independent, reproducible seed for sub-stream `stream` of `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return KeyHasher::mix(seed ^ KeyHasher::mix(stream + 0x9e3779b97f4a7c15ULL));
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11U) * 0x1.0p-53; }

/// Uniform integer in [0, bound); bound > 0. Rejection keeps it unbiased.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) {
      return r % bound;
    }
  }
}

/// Fisher-Yates permutation of [0, n).
inline std::vector<std::uint64_t> random_permutation(std::uint64_t n, Rng& rng) {
  std::vector<std::uint64_t> perm(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    perm[i] = i;
  }
  for (std::uint64_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[uniform_below(rng, i)]);
  }
  return perm;
}

}  // namespace expire_treap
