#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "jz/common.hpp"

namespace jz {

/**
 * Deterministic random source used everywhere in the library.
 *
 * The generator is splitmix64 and every distribution is implemented on top
 * of its raw 64-bit output, so a (seed, call sequence) pair produces the
 * same values on any platform and standard library. Training runs derive
 * per-step/per-example seeds with mix() instead of sharing one stream,
 * which keeps corruption draws independent of batch assembly order.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t uniform_int(std::size_t n) {
    require(n > 0, "uniform_int: empty range");
    // Multiply-shift; bias is < 2^-53 for the range sizes used here.
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Normal(0, std) truncated to [-2*std, 2*std], the usual init scheme.
  double truncated_normal(double std_dev) {
    for (;;) {
      double z = normal();
      if (std::abs(z) <= 2.0) return z * std_dev;
    }
  }

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_int(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Stateless mixing for derived seeds (seed, stream id, step, ...).
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix(mix(a, b), c);
  }

 private:
  std::uint64_t state_;
};

}  // namespace jz
