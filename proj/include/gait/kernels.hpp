#pragma once

#include <cstddef>

namespace gait::simd {

// Inner-loop kernel table. Two variants exist: scalar reference and AVX2,
// selected once at startup. Kernels fall in two classes:
//
//  exact: every variant produces bit-identical results (elementwise ops, and
//         max whose reduction is order-insensitive; conv rows accumulate taps
//         per output element in a fixed tap order in every variant).
//  lane-ordered reductions (row_sum, dot, sq_dist): the AVX2 variant sums in
//         a fixed 4-lane order, deterministic run to run but not the scalar
//         order; equivalence tests bound the difference instead.
struct Kernels {
  const char* name;

  // exact
  void (*add)(const double* a, const double* b, double* out, size_t n);
  void (*ewise_max)(const double* a, const double* b, double* out, size_t n);
  void (*leaky_relu_fwd)(const double* x, double slope, double* y, size_t n);
  void (*leaky_relu_bwd)(const double* x, const double* up, double slope,
                         double* gx, size_t n);
  void (*scale)(const double* x, double k, double* y, size_t n);
  void (*axpy)(double k, const double* x, double* y, size_t n);  // y += k*x
  // out[x] += sum_t k[t] * in[x + t], taps applied in order t = 0..kw-1.
  void (*conv_row_taps)(const double* in, const double* k, size_t kw,
                        double* out, size_t n);
  // max over x[0..n), smallest index on ties
  double (*row_max)(const double* x, size_t n, size_t* argmax);

  // lane-ordered reductions
  double (*row_sum)(const double* x, size_t n);
  double (*dot)(const double* a, const double* b, size_t n);
  double (*sq_dist)(const double* a, const double* b, size_t n);
};

const Kernels& scalar_kernels();
const Kernels* avx2_kernels();  // nullptr when unsupported at runtime

/// Active table; GAITCHD_SIMD=scalar|avx2|auto overrides autodetection.
const Kernels& active();

}  // namespace gait::simd
