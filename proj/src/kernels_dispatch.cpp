#include <cstdlib>
#include <cstring>

#include "gait/kernels.hpp"

namespace gait::simd {

#ifndef GAIT_HAVE_AVX2
const Kernels* avx2_kernels() { return nullptr; }
#endif

namespace {

const Kernels& select() {
  const char* pref = std::getenv("GAITCHD_SIMD");
  if (pref && std::strcmp(pref, "scalar") == 0) return scalar_kernels();
  const Kernels* avx2 = avx2_kernels();
  if (pref && std::strcmp(pref, "avx2") == 0 && !avx2)
    return scalar_kernels();  // requested but unsupported; fall back
  return avx2 ? *avx2 : scalar_kernels();
}

}  // namespace

const Kernels& active() {
  static const Kernels& k = select();
  return k;
}

}  // namespace gait::simd
