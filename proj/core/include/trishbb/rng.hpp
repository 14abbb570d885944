#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace trishbb::rng {

// SplitMix64 finalizer. Used as the mixing function of a counter-based
// generator: every draw is a pure function of (seed, purpose, counter, index)
// and therefore independent of evaluation order, threads, or platform.
inline std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
  // FNV-1a folded through mix() so short tags spread over all 64 bits.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return mix(h);
}

// Seed for the i-th run of a sweep. Depends only on (master, i), so a K-seed
// sweep is a strict prefix of a larger one with the same master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t i) {
  return mix(master ^ mix(i + 1));
}

// Stateless addressed stream: draws are looked up, never consumed.
class Stream {
 public:
  Stream() = default;
  Stream(std::uint64_t seed, std::string_view purpose)
      : key_(mix(seed ^ hash_tag(purpose))) {}

  std::uint64_t bits(std::uint64_t counter, std::uint64_t index) const {
    return mix(mix(key_ ^ counter) ^ index);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double u01(std::uint64_t counter, std::uint64_t index) const {
    return static_cast<double>(bits(counter, index) >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound). Multiply-shift map; the residual bias is
  // bound/2^64, immaterial for the bounds used here (<= a few million).
  std::uint64_t below(std::uint64_t counter, std::uint64_t index,
                      std::uint64_t bound) const {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(bits(counter, index)) * bound) >> 64);
  }

  // Standard normal via Box-Muller on draws (counter, 2*index) and
  // (counter, 2*index+1). The sine partner is discarded for addressability.
  double normal(std::uint64_t counter, std::uint64_t index) const {
    const double u1 =
        (static_cast<double>(bits(counter, 2 * index) >> 11) + 1.0) * 0x1.0p-53;
    const double u2 =
        static_cast<double>(bits(counter, 2 * index + 1) >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

 private:
  std::uint64_t key_ = 0;
};

}  // namespace trishbb::rng
