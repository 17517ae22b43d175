#include <cstdlib>
#include <cstring>

#include "covmode/log.hpp"
#include "covmode/simd.hpp"

namespace covmode::simd {

#ifndef COVMODE_BUILD_AVX2
const Kernels* avx2_kernels() { return nullptr; }
#endif

static const Kernels& select() {
  const char* env = std::getenv("COVMODE_SIMD");
  if (env && !std::strcmp(env, "scalar")) return scalar_kernels();
  const Kernels* avx2 = avx2_kernels();
  if (env && !std::strcmp(env, "avx2")) {
    if (avx2
#if defined(__x86_64__) || defined(_M_X64)
        && __builtin_cpu_supports("avx2")
#endif
    )
      return *avx2;
    logf(LogLevel::Warn, "COVMODE_SIMD=avx2 requested but unavailable; using scalar kernels");
    return scalar_kernels();
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (avx2 && __builtin_cpu_supports("avx2")) return *avx2;
#endif
  return scalar_kernels();
}

const Kernels& active() {
  static const Kernels& k = select();
  return k;
}

}  // namespace covmode::simd
