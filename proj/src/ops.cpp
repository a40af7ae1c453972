#include "gait/ops.hpp"

#include "gait/kernels.hpp"

namespace gait {

namespace {

long axis_extent(const Shape4& s, int axis) {
  switch (axis) {
    case 0: return s.n;
    case 1: return s.c;
    case 2: return s.h;
    case 3: return s.w;
    default: throw ShapeError("reduce: axis must be in {0,1,2,3}");
  }
}

Shape4 collapse_axis(Shape4 s, int axis) {
  switch (axis) {
    case 0: s.n = 1; break;
    case 1: s.c = 1; break;
    case 2: s.h = 1; break;
    default: s.w = 1; break;
  }
  return s;
}

// outer × len × inner decomposition of a flat row-major walk over one axis
struct AxisWalk {
  long outer, len, inner;
};

AxisWalk walk(const Shape4& s, int axis) {
  require(axis >= 0 && axis <= 3, "reduce: axis must be in {0,1,2,3}");
  long dims[4] = {s.n, s.c, s.h, s.w};
  AxisWalk v{1, dims[axis], 1};
  for (int i = 0; i < axis; ++i) v.outer *= dims[i];
  for (int i = axis + 1; i < 4; ++i) v.inner *= dims[i];
  return v;
}

}  // namespace

Conv2dResult conv2d(const Tensor4& input, const Tensor4& kernels,
                    const std::vector<double>& bias, long padding) {
  const Shape4& is = input.shape();
  const Shape4& ks = kernels.shape();
  require(is.c == ks.c,
          "conv2d: input channels " + is.str() + " do not match kernels " + ks.str());
  require(static_cast<long>(bias.size()) == ks.n,
          "conv2d: bias length " + std::to_string(bias.size()) + " vs cout " +
              std::to_string(ks.n));
  // "same" padding requires odd kernel dims; padding 0 takes any kernel
  require(padding == 0 || (ks.h % 2 == 1 && ks.w % 2 == 1 &&
                           padding == (ks.h - 1) / 2 && padding == (ks.w - 1) / 2),
          "conv2d: padding must be 0 or (k-1)/2 with odd kernel dims");
  long ho = is.h - ks.h + 1 + 2 * padding;
  long wo = is.w - ks.w + 1 + 2 * padding;
  require(ho >= 1 && wo >= 1, "conv2d: kernel " + ks.str() + " larger than input " + is.str());

  long ph = is.h + 2 * padding, pw = is.w + 2 * padding;
  Conv2dRecord rec;
  rec.in_shape = is;
  rec.kshape = ks;
  rec.padding = padding;
  rec.kernels = kernels;
  rec.padded.assign(static_cast<size_t>(is.n) * is.c * ph * pw, 0.0);
  for (long b = 0; b < is.n; ++b)
    for (long ci = 0; ci < is.c; ++ci)
      for (long y = 0; y < is.h; ++y) {
        const double* src = input.data() + input.idx(b, ci, y, 0);
        double* dst = rec.padded.data() + ((b * is.c + ci) * ph + y + padding) * pw + padding;
        for (long x = 0; x < is.w; ++x) dst[x] = src[x];
      }

  const auto& K = simd::active();
  Tensor4 out({is.n, ks.n, ho, wo});
  for (long b = 0; b < is.n; ++b)
    for (long co = 0; co < ks.n; ++co) {
      for (long y = 0; y < ho; ++y) {
        double* orow = out.data() + out.idx(b, co, y, 0);
        for (long x = 0; x < wo; ++x) orow[x] = bias[co];
      }
      for (long ci = 0; ci < is.c; ++ci)
        for (long ky = 0; ky < ks.h; ++ky) {
          const double* kr = kernels.data() + kernels.idx(co, ci, ky, 0);
          for (long y = 0; y < ho; ++y) {
            const double* irow = rec.padded.data() + ((b * is.c + ci) * ph + y + ky) * pw;
            K.conv_row_taps(irow, kr, static_cast<size_t>(ks.w),
                            out.data() + out.idx(b, co, y, 0),
                            static_cast<size_t>(wo));
          }
        }
    }
  return {std::move(out), std::move(rec)};
}

Conv2dGrads conv2d_backward(const Conv2dRecord& rec, const Tensor4& upstream) {
  const Shape4& is = rec.in_shape;
  const Shape4& ks = rec.kshape;
  long p = rec.padding;
  long ho = is.h - ks.h + 1 + 2 * p;
  long wo = is.w - ks.w + 1 + 2 * p;
  require(upstream.shape() == Shape4{is.n, ks.n, ho, wo},
          "conv2d_backward: upstream " + upstream.shape().str() + " does not match");
  long ph = is.h + 2 * p, pw = is.w + 2 * p;

  const auto& K = simd::active();
  Conv2dGrads g{Tensor4(is), Tensor4(ks), std::vector<double>(ks.n, 0.0)};
  std::vector<double> dpad(rec.padded.size(), 0.0);

  for (long b = 0; b < is.n; ++b)
    for (long co = 0; co < ks.n; ++co) {
      for (long y = 0; y < ho; ++y)
        g.d_bias[co] += K.row_sum(upstream.data() + upstream.idx(b, co, y, 0),
                                  static_cast<size_t>(wo));
      for (long ci = 0; ci < is.c; ++ci)
        for (long ky = 0; ky < ks.h; ++ky)
          for (long y = 0; y < ho; ++y) {
            const double* urow = upstream.data() + upstream.idx(b, co, y, 0);
            const double* irow = rec.padded.data() + ((b * is.c + ci) * ph + y + ky) * pw;
            double* drow = dpad.data() + ((b * is.c + ci) * ph + y + ky) * pw;
            for (long kx = 0; kx < ks.w; ++kx) {
              g.d_kernels[rec.kernels.idx(co, ci, ky, kx)] +=
                  K.dot(urow, irow + kx, static_cast<size_t>(wo));
              K.axpy(rec.kernels[rec.kernels.idx(co, ci, ky, kx)], urow, drow + kx,
                     static_cast<size_t>(wo));
            }
          }
    }

  for (long b = 0; b < is.n; ++b)
    for (long ci = 0; ci < is.c; ++ci)
      for (long y = 0; y < is.h; ++y) {
        const double* src = dpad.data() + ((b * is.c + ci) * ph + y + p) * pw + p;
        double* dst = g.d_input.data() + g.d_input.idx(b, ci, y, 0);
        for (long x = 0; x < is.w; ++x) dst[x] = src[x];
      }
  return g;
}

LeakyReluResult leaky_relu(const Tensor4& input, double slope) {
  require(slope >= 0.0 && slope < 1.0, "leaky_relu: slope must be in [0,1)");
  Tensor4 out(input.shape());
  simd::active().leaky_relu_fwd(input.data(), slope, out.data(),
                                static_cast<size_t>(input.size()));
  return {std::move(out), {input, slope}};
}

Tensor4 leaky_relu_backward(const LeakyReluRecord& rec, const Tensor4& upstream) {
  require(upstream.same_shape(rec.input), "leaky_relu_backward: shape mismatch");
  Tensor4 gx(rec.input.shape());
  simd::active().leaky_relu_bwd(rec.input.data(), upstream.data(), rec.slope,
                                gx.data(), static_cast<size_t>(gx.size()));
  return gx;
}

MaxPoolResult maxpool2d(const Tensor4& input) {
  const Shape4& s = input.shape();
  require(s.h % 2 == 0 && s.w % 2 == 0,
          "maxpool2d: h and w must be even, got " + s.str());
  Shape4 os{s.n, s.c, s.h / 2, s.w / 2};
  MaxPoolResult r{Tensor4(os), {s, std::vector<uint32_t>(static_cast<size_t>(os.size()))}};
  long o = 0;
  for (long b = 0; b < s.n; ++b)
    for (long ci = 0; ci < s.c; ++ci)
      for (long y = 0; y < os.h; ++y)
        for (long x = 0; x < os.w; ++x, ++o) {
          long i0 = input.idx(b, ci, 2 * y, 2 * x);
          long cand[4] = {i0, i0 + 1, i0 + s.w, i0 + s.w + 1};
          long best = cand[0];
          for (int t = 1; t < 4; ++t)
            if (input[cand[t]] > input[best]) best = cand[t];
          r.out[o] = input[best];
          r.rec.argmax[o] = static_cast<uint32_t>(best);
        }
  return r;
}

Tensor4 maxpool2d_backward(const MaxPoolRecord& rec, const Tensor4& upstream) {
  require(static_cast<size_t>(upstream.size()) == rec.argmax.size(),
          "maxpool2d_backward: upstream size mismatch");
  Tensor4 gx(rec.in_shape);
  for (long o = 0; o < upstream.size(); ++o) gx[rec.argmax[o]] += upstream[o];
  return gx;
}

ReduceResult reduce_max(const Tensor4& input, int axis) {
  AxisWalk v = walk(input.shape(), axis);
  require(v.len >= 1, "reduce_max: empty axis");
  ReduceResult r{Tensor4(collapse_axis(input.shape(), axis)),
                 {input.shape(), axis, std::vector<uint32_t>(static_cast<size_t>(v.outer * v.inner))}};
  const auto& K = simd::active();
  long o = 0;
  for (long a = 0; a < v.outer; ++a)
    for (long i = 0; i < v.inner; ++i, ++o) {
      const double* base = input.data() + a * v.len * v.inner + i;
      if (v.inner == 1) {
        size_t at;
        r.out[o] = K.row_max(base, static_cast<size_t>(v.len), &at);
        r.rec.argmax[o] = static_cast<uint32_t>(at);
      } else {
        double best = base[0];
        long at = 0;
        for (long j = 1; j < v.len; ++j)
          if (base[j * v.inner] > best) {
            best = base[j * v.inner];
            at = j;
          }
        r.out[o] = best;
        r.rec.argmax[o] = static_cast<uint32_t>(at);
      }
    }
  return r;
}

Tensor4 reduce_max_backward(const ReduceRecord& rec, const Tensor4& upstream) {
  AxisWalk v = walk(rec.in_shape, rec.axis);
  require(upstream.size() == v.outer * v.inner, "reduce_max_backward: upstream mismatch");
  Tensor4 gx(rec.in_shape);
  long o = 0;
  for (long a = 0; a < v.outer; ++a)
    for (long i = 0; i < v.inner; ++i, ++o)
      gx[a * v.len * v.inner + static_cast<long>(rec.argmax[o]) * v.inner + i] += upstream[o];
  return gx;
}

ReduceResult reduce_mean(const Tensor4& input, int axis) {
  AxisWalk v = walk(input.shape(), axis);
  require(v.len >= 1, "reduce_mean: empty axis");
  ReduceResult r{Tensor4(collapse_axis(input.shape(), axis)), {input.shape(), axis, {}}};
  const auto& K = simd::active();
  long o = 0;
  for (long a = 0; a < v.outer; ++a)
    for (long i = 0; i < v.inner; ++i, ++o) {
      const double* base = input.data() + a * v.len * v.inner + i;
      double s;
      if (v.inner == 1) {
        s = K.row_sum(base, static_cast<size_t>(v.len));
      } else {
        s = 0.0;
        for (long j = 0; j < v.len; ++j) s += base[j * v.inner];
      }
      r.out[o] = s / static_cast<double>(v.len);
    }
  return r;
}

Tensor4 reduce_mean_backward(const ReduceRecord& rec, const Tensor4& upstream) {
  AxisWalk v = walk(rec.in_shape, rec.axis);
  require(upstream.size() == v.outer * v.inner, "reduce_mean_backward: upstream mismatch");
  Tensor4 gx(rec.in_shape);
  double inv = 1.0 / static_cast<double>(v.len);
  long o = 0;
  for (long a = 0; a < v.outer; ++a)
    for (long i = 0; i < v.inner; ++i, ++o) {
      double u = upstream[o] * inv;
      for (long j = 0; j < v.len; ++j) gx[a * v.len * v.inner + j * v.inner + i] = u;
    }
  return gx;
}

Tensor4 add(const Tensor4& a, const Tensor4& b) {
  require(a.same_shape(b),
          "add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  Tensor4 out(a.shape());
  simd::active().add(a.data(), b.data(), out.data(), static_cast<size_t>(a.size()));
  return out;
}

}  // namespace gait
