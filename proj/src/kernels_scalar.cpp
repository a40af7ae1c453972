#include "gait/kernels.hpp"

namespace gait::simd {
namespace {

void add_s(const double* a, const double* b, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void ewise_max_s(const double* a, const double* b, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] >= b[i] ? a[i] : b[i];
}

void leaky_relu_fwd_s(const double* x, double slope, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_bwd_s(const double* x, const double* up, double slope,
                      double* gx, size_t n) {
  for (size_t i = 0; i < n; ++i) gx[i] = x[i] >= 0.0 ? up[i] : slope * up[i];
}

void scale_s(const double* x, double k, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = k * x[i];
}

void axpy_s(double k, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = y[i] + k * x[i];
}

void conv_row_taps_s(const double* in, const double* k, size_t kw, double* out,
                     size_t n) {
  for (size_t i = 0; i < n; ++i) {
    double t = out[i];
    for (size_t j = 0; j < kw; ++j) t = t + k[j] * in[i + j];
    out[i] = t;
  }
}

double row_max_s(const double* x, size_t n, size_t* argmax) {
  double best = x[0];
  size_t at = 0;
  for (size_t i = 1; i < n; ++i)
    if (x[i] > best) {
      best = x[i];
      at = i;
    }
  if (argmax) *argmax = at;
  return best;
}

double row_sum_s(const double* x, size_t n) {
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double dot_s(const double* a, const double* b, size_t n) {
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sq_dist_s(const double* a, const double* b, size_t n) {
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k = {
      "scalar",        add_s,   ewise_max_s, leaky_relu_fwd_s,
      leaky_relu_bwd_s, scale_s, axpy_s,      conv_row_taps_s,
      row_max_s,       row_sum_s, dot_s,     sq_dist_s,
  };
  return k;
}

}  // namespace gait::simd
