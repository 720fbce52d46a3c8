#pragma once

#include <cstdint>

#include "rfo/geometry.hpp"

namespace rfo {

// splitmix64 finalizer; full-avalanche 64-bit mix.
std::uint64_t mix64(std::uint64_t z);

// Uniform double in (0,1), 53 significant bits, never 0 or 1.
double u01_from_bits(std::uint64_t h);

// Quantile of the standard normal (Wichura's PPND16), |error| < 1e-15 in the
// bulk. p in (0,1).
double inverse_normal_cdf(double p);

// Site-keyed standard Gaussian: hash (seed, site, stream) -> uniform ->
// quantile. The whole field is defined pointwise, so any materialization is a
// restriction of the same function.
double gaussian_at(std::uint64_t seed, const Site& s, std::uint32_t stream = 0);

// Deterministic counter stream (splitmix64). Cheap to fork by key.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : state_(key) {}
  std::uint64_t next_u64();
  double next_u01();                        // (0,1)
  double next_uniform(double a, double b);  // [a,b)
  double next_gaussian();
  std::uint64_t next_below(std::uint64_t n);  // unbiased, n >= 1

 private:
  std::uint64_t state_;
};

}  // namespace rfo
