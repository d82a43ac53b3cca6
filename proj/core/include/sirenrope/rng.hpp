#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sirenrope {

/// 64-bit FNV-1a, used to derive independent named RNG streams from a seed.
constexpr std::uint64_t fnv1a(std::string_view text, std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

/// Engine for the stream `name` under `seed`. Streams with different names
/// are independent, so adding a parameter never shifts another's draws.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::string_view name) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(fnv1a(name)),
                    static_cast<std::uint32_t>(fnv1a(name) >> 32)};
  return std::mt19937_64(seq);
}

inline std::vector<double> uniform_values(std::mt19937_64& rng, std::size_t n, double lo,
                                          double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> out(n);
  for (auto& v : out) v = dist(rng);
  return out;
}

}  // namespace sirenrope
