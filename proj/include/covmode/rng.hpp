#pragma once
#include <cstdint>
#include <random>

#include "covmode/matrix.hpp"

namespace covmode {

// Deterministic random source. The raw stream is std::mt19937_64 (fully
// specified by the standard, so reproducible across platforms); every
// distribution on top of it is implemented here rather than taken from
// <random>, because the standard leaves distribution algorithms
// implementation-defined and that would silently break the fixed-seed
// reproducibility contract between compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // [0,1), 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // strictly inside (0,1); safe to feed into logs and inverse CDFs
  double uniform_open() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }

  double normal();                 // inverse-CDF (Wichura's PPND16)
  double gamma(double shape);      // Marsaglia–Tsang, unit scale
  double chisquare(double df) { return 2.0 * gamma(0.5 * df); }

  // uniform draw from {0, 1, ..., n-1}, unbiased via rejection
  std::size_t index(std::size_t n);

  void fill_normal(Matrix& z);

 private:
  std::mt19937_64 gen_;
};

// Quantile function of the standard normal, accurate to ~1e-15; exposed for
// tests and for the diagnostics that need it directly.
double normal_quantile(double p);

}  // namespace covmode
