#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace pcnas {

inline constexpr std::uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ULL;

/// splitmix64 output function applied to an already-advanced state.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// n-th output (0-based) of a splitmix64 stream seeded with `seed`. The
/// stream is counter based, so any draw can be computed without the ones
/// before it.
constexpr std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t n) noexcept {
  return splitmix64_mix(seed + (n + 1) * kSplitMixGamma);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Top 53 bits of `x` as a double in [0, 1).
constexpr double unit_interval(std::uint64_t x) noexcept {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// Explicit random state threaded through the genetic operators. Copyable so
/// callers can fork or replay a stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept {
    state_ += kSplitMixGamma;
    return splitmix64_mix(state_);
  }

  double uniform01() noexcept { return unit_interval(next_u64()); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n) noexcept {
    const std::uint64_t bound = n;
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x >= threshold) return static_cast<std::size_t>(x % bound);
    }
  }

  bool coin() noexcept { return (next_u64() >> 63) != 0; }

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace pcnas
