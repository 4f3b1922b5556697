#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace catis {

/// Counter-based random stream keyed by (seed, a, b).
///
/// Each key yields an independent stream, so draws for token i in
/// Monte-Carlo iteration k do not depend on the order in which other
/// (token, iteration) pairs are evaluated. Satisfies UniformRandomBitGenerator
/// so it plugs into the standard distributions.
class KeyedStream {
 public:
  using result_type = std::uint64_t;

  explicit KeyedStream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) noexcept
      : key_(mix(mix(mix(seed ^ 0x243f6a8885a308d3ULL) ^ a) ^ (b + 0x13198a2e03707344ULL))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return mix(key_ + (++counter_) * kGolden); }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  // splitmix64 finalizer
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Standard-normal sampler over a keyed stream.
class GaussianStream {
 public:
  GaussianStream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0)
      : engine_(seed, a, b) {}
  double operator()() { return dist_(engine_); }

 private:
  KeyedStream engine_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

}  // namespace catis
