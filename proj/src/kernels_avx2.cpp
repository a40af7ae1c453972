#include <immintrin.h>

#include "gait/kernels.hpp"

// AVX2 variants. FMA is deliberately not used: every multiply-add rounds
// twice, exactly like the scalar reference, so the exact-class kernels are
// bit-identical to it.

namespace gait::simd {
namespace {

void add_v(const double* a, const double* b, double* out, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i,
                     _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void ewise_max_v(const double* a, const double* b, double* out, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d vb = _mm256_loadu_pd(b + i);
    __m256d ge = _mm256_cmp_pd(va, vb, _CMP_GE_OQ);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(vb, va, ge));
  }
  for (; i < n; ++i) out[i] = a[i] >= b[i] ? a[i] : b[i];
}

void leaky_relu_fwd_v(const double* x, double slope, double* y, size_t n) {
  __m256d vs = _mm256_set1_pd(slope);
  __m256d z = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d neg = _mm256_mul_pd(vs, vx);
    __m256d ge = _mm256_cmp_pd(vx, z, _CMP_GE_OQ);
    _mm256_storeu_pd(y + i, _mm256_blendv_pd(neg, vx, ge));
  }
  for (; i < n; ++i) y[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_bwd_v(const double* x, const double* up, double slope,
                      double* gx, size_t n) {
  __m256d vs = _mm256_set1_pd(slope);
  __m256d z = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d vu = _mm256_loadu_pd(up + i);
    __m256d neg = _mm256_mul_pd(vs, vu);
    __m256d ge = _mm256_cmp_pd(vx, z, _CMP_GE_OQ);
    _mm256_storeu_pd(gx + i, _mm256_blendv_pd(neg, vu, ge));
  }
  for (; i < n; ++i) gx[i] = x[i] >= 0.0 ? up[i] : slope * up[i];
}

void scale_v(const double* x, double k, double* y, size_t n) {
  __m256d vk = _mm256_set1_pd(k);
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(vk, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = k * x[i];
}

void axpy_v(double k, const double* x, double* y, size_t n) {
  __m256d vk = _mm256_set1_pd(k);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_mul_pd(vk, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), t));
  }
  for (; i < n; ++i) y[i] = y[i] + k * x[i];
}

void conv_row_taps_v(const double* in, const double* k, size_t kw, double* out,
                     size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_loadu_pd(out + i);
    for (size_t j = 0; j < kw; ++j) {
      __m256d vk = _mm256_set1_pd(k[j]);
      t = _mm256_add_pd(t, _mm256_mul_pd(vk, _mm256_loadu_pd(in + i + j)));
    }
    _mm256_storeu_pd(out + i, t);
  }
  for (; i < n; ++i) {
    double t = out[i];
    for (size_t j = 0; j < kw; ++j) t = t + k[j] * in[i + j];
    out[i] = t;
  }
}

double row_max_v(const double* x, size_t n, size_t* argmax) {
  double best;
  if (n >= 8) {
    __m256d m = _mm256_loadu_pd(x);
    size_t i = 4;
    for (; i + 4 <= n; i += 4) m = _mm256_max_pd(m, _mm256_loadu_pd(x + i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, m);
    best = lanes[0];
    for (int l = 1; l < 4; ++l)
      if (lanes[l] > best) best = lanes[l];
    for (; i < n; ++i)
      if (x[i] > best) best = x[i];
  } else {
    best = x[0];
    for (size_t i = 1; i < n; ++i)
      if (x[i] > best) best = x[i];
  }
  // first position compares equal to the max; returning x[at] keeps the
  // payload (e.g. -0.0 vs 0.0) identical to the scalar reference
  size_t at = 0;
  while (x[at] != best) ++at;
  if (argmax) *argmax = at;
  return x[at];
}

double row_sum_v(const double* x, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
  for (; i < n; ++i) s += x[i];
  return s;
}

double dot_v(const double* a, const double* b, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc,
                        _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sq_dist_v(const double* a, const double* b, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
  for (; i < n; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

const Kernels* avx2_kernels() {
  if (!__builtin_cpu_supports("avx2")) return nullptr;
  static const Kernels k = {
      "avx2",          add_v,   ewise_max_v, leaky_relu_fwd_v,
      leaky_relu_bwd_v, scale_v, axpy_v,      conv_row_taps_v,
      row_max_v,       row_sum_v, dot_v,     sq_dist_v,
  };
  return &k;
}

}  // namespace gait::simd
