#pragma once

#include <cmath>
#include <cstdint>

#include "redstress/specfun.hpp"

namespace redstress {

// Counter-based stream: draw j of stream s under a given seed is a pure
// function of (seed, s, j), so work partitioning never changes results.
class rng_stream {
public:
  rng_stream(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(mix(seed) ^ mix(stream * 0xD2B74407B1CE6E93ull + 0x9E3779B97F4A7C15ull))) {}

  std::uint64_t next_u64() { return mix(key_ + 0x9E3779B97F4A7C15ull * ++ctr_); }

  // Uniform on the open interval (0,1).
  double next_uniform() {
    return (next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  double next_normal() { return sf::norm_ppf(next_uniform()); }

  // Marsaglia-Tsang; shape < 1 boosted through shape+1.
  double next_gamma(double shape) {
    if (shape < 1.0) {
      const double u = next_uniform();
      return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = next_normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = next_uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
};

}  // namespace redstress
