#pragma once

#include <cstdint>
#include <limits>

namespace cohmoment {

/// SplitMix64 (Steele, Lea, Flood 2014). A 64-bit generator whose state is a
/// Weyl sequence passed through a bijective mixer, which makes it trivially
/// splittable: every (master seed, stream id) pair maps to an independent
/// starting state via `stream_seed`. Satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += kGamma;
    return mix(state_);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

 private:
  std::uint64_t state_;
};

using Rng = SplitMix64;

/// Seed for stream `stream` of a run seeded with `master`. Distinct streams
/// get decorrelated states; the mapping is pure, so results never depend on
/// which thread consumes which stream.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return SplitMix64::mix(SplitMix64::mix(master) ^ SplitMix64::mix(stream + SplitMix64::kGamma));
}

/// Two-level stream id, e.g. (state index, deviation draw).
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t outer,
                                    std::uint64_t inner) noexcept {
  return stream_seed(stream_seed(master, outer), inner);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t stream = 0) noexcept {
  return Rng(stream_seed(master, stream));
}

}  // namespace cohmoment
