#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace manifold_id {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Stateless counter-based generator. Every draw is addressed by
/// (index, slot), so draws can be evaluated in any order or in parallel
/// and still reproduce bit for bit. Substreams are derived from labels so
/// that adding a consumer never shifts the draws of another.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::string_view label)
      : key_(splitmix64(seed ^ splitmix64(fnv1a64(label)))) {}

  constexpr CounterRng substream(std::string_view label) const {
    return CounterRng(key_, label);
  }

  constexpr std::uint64_t bits(std::uint64_t index, std::uint64_t slot = 0) const {
    return splitmix64(key_ ^ splitmix64(index * 0xD1B54A32D192ED03ULL + slot));
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform(std::uint64_t index, std::uint64_t slot = 0) const {
    return static_cast<double>(bits(index, slot) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t index, std::uint64_t slot, double lo, double hi) const {
    return lo + (hi - lo) * uniform(index, slot);
  }

  /// Standard normal via Box-Muller over slots (2*slot, 2*slot+1).
  double normal(std::uint64_t index, std::uint64_t slot = 0) const {
    const double u1 = 1.0 - uniform(index, 2 * slot);  // (0, 1]
    const double u2 = uniform(index, 2 * slot + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace manifold_id
