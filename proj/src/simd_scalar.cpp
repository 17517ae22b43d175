#include "covmode/simd.hpp"

// Reference kernels. The 4-lane accumulator layout mirrors one 256-bit
// register: lane j accumulates elements with index ≡ j (mod 4), and the
// final combine is (l0+l2)+(l1+l3), matching the AVX2 horizontal reduction.
// Keep this file compiled with -ffp-contract=off.

namespace covmode::simd {

static double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 += x[i] * y[i];
    acc1 += x[i + 1] * y[i + 1];
    acc2 += x[i + 2] * y[i + 2];
    acc3 += x[i + 3] * y[i + 3];
  }
  double s = (acc0 + acc2) + (acc1 + acc3);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

static void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

static double sum_scalar(const double* x, std::size_t n) {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 += x[i];
    acc1 += x[i + 1];
    acc2 += x[i + 2];
    acc3 += x[i + 3];
  }
  double s = (acc0 + acc2) + (acc1 + acc3);
  for (; i < n; ++i) s += x[i];
  return s;
}

const Kernels& scalar_kernels() {
  static const Kernels k{dot_scalar, axpy_scalar, sum_scalar, "scalar"};
  return k;
}

}  // namespace covmode::simd
