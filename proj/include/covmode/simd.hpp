#pragma once
#include <cstddef>

// Runtime-dispatched dense kernels. There is one scalar reference
// implementation and (on x86-64 builds) an AVX2 variant. Both use the same
// 4-lane accumulation tree and are compiled without FMA contraction, so the
// variants return bitwise-identical results; picking one or the other cannot
// change any downstream number. Selection happens once, at first use:
// COVMODE_SIMD=scalar|avx2 overrides the CPUID default.

namespace covmode::simd {

struct Kernels {
  double (*dot)(const double* x, const double* y, std::size_t n);
  void (*axpy)(double a, const double* x, double* y, std::size_t n);  // y += a*x
  double (*sum)(const double* x, std::size_t n);
  const char* name;
};

const Kernels& active();
const Kernels& scalar_kernels();
const Kernels* avx2_kernels();  // nullptr when the build or CPU lacks AVX2

inline double dot(const double* x, const double* y, std::size_t n) { return active().dot(x, y, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy(a, x, y, n); }
inline double sum(const double* x, std::size_t n) { return active().sum(x, n); }

}  // namespace covmode::simd
