#ifdef COVMODE_BUILD_AVX2
#include <immintrin.h>

#include "covmode/simd.hpp"

// AVX2 kernels. Deliberately mul+add (no vfmadd*) so results match the
// scalar reference bitwise; see simd_scalar.cpp for the accumulation layout.

namespace covmode::simd {

static double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d vy = _mm256_loadu_pd(y + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(vx, vy));
  }
  __m128d lo = _mm256_castpd256_pd128(acc);        // lanes 0,1
  __m128d hi = _mm256_extractf128_pd(acc, 1);      // lanes 2,3
  __m128d pair = _mm_add_pd(lo, hi);               // (l0+l2, l1+l3)
  double s = _mm_cvtsd_f64(pair) + _mm_cvtsd_f64(_mm_unpackhi_pd(pair, pair));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

static void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    __m256d vx = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

static double sum_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  __m128d pair = _mm_add_pd(lo, hi);
  double s = _mm_cvtsd_f64(pair) + _mm_cvtsd_f64(_mm_unpackhi_pd(pair, pair));
  for (; i < n; ++i) s += x[i];
  return s;
}

const Kernels* avx2_kernels() {
  static const Kernels k{dot_avx2, axpy_avx2, sum_avx2, "avx2"};
  return &k;
}

}  // namespace covmode::simd
#endif  // COVMODE_BUILD_AVX2
