#pragma once

#include <cstdint>
#include <vector>

#include "gait/tensor.hpp"

namespace gait {

// Each forward op returns its output plus a record holding exactly what the
// hand-written backward pass consumes. There is no general tape; the pipeline
// is a fixed composition.

struct Conv2dRecord {
  Shape4 in_shape;
  Shape4 kshape;
  long padding = 0;
  std::vector<double> padded;  // zero-padded input, (n, cin, h+2p, w+2p)
  Tensor4 kernels;
};

struct Conv2dResult {
  Tensor4 out;
  Conv2dRecord rec;
};

struct Conv2dGrads {
  Tensor4 d_input;
  Tensor4 d_kernels;
  std::vector<double> d_bias;
};

Conv2dResult conv2d(const Tensor4& input, const Tensor4& kernels,
                    const std::vector<double>& bias, long padding);
Conv2dGrads conv2d_backward(const Conv2dRecord& rec, const Tensor4& upstream);

struct LeakyReluRecord {
  Tensor4 input;
  double slope = 0.0;
};

struct LeakyReluResult {
  Tensor4 out;
  LeakyReluRecord rec;
};

LeakyReluResult leaky_relu(const Tensor4& input, double slope);
Tensor4 leaky_relu_backward(const LeakyReluRecord& rec, const Tensor4& upstream);

struct MaxPoolRecord {
  Shape4 in_shape;
  std::vector<uint32_t> argmax;  // flat input index per output element
};

struct MaxPoolResult {
  Tensor4 out;
  MaxPoolRecord rec;
};

/// Non-overlapping 2x2 max pooling; ties go to the first element in
/// row-major order.
MaxPoolResult maxpool2d(const Tensor4& input);
Tensor4 maxpool2d_backward(const MaxPoolRecord& rec, const Tensor4& upstream);

struct ReduceRecord {
  Shape4 in_shape;
  int axis = 0;
  std::vector<uint32_t> argmax;  // max only: index along the axis, per slice
};

struct ReduceResult {
  Tensor4 out;
  ReduceRecord rec;
};

/// Maximum along one axis (collapsed to length 1); smallest index on ties.
ReduceResult reduce_max(const Tensor4& input, int axis);
Tensor4 reduce_max_backward(const ReduceRecord& rec, const Tensor4& upstream);

/// Arithmetic mean along one axis (collapsed to length 1).
ReduceResult reduce_mean(const Tensor4& input, int axis);
Tensor4 reduce_mean_backward(const ReduceRecord& rec, const Tensor4& upstream);

Tensor4 add(const Tensor4& a, const Tensor4& b);
// backward of add is the identity on both inputs; no record needed

}  // namespace gait
