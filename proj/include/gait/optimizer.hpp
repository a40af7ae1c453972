#pragma once

#include <vector>

#include "gait/tensor.hpp"

namespace gait {

/// Adam moments, one (m, v) pair per parameter tensor in a fixed order.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Tensor4> m;
  std::vector<Tensor4> v;

  static AdamState init(const std::vector<const Tensor4*>& params);
};

/// One bias-corrected Adam update. Rejects non-finite gradients.
void adam_step(const std::vector<Tensor4*>& params,
               const std::vector<const Tensor4*>& grads, AdamState& state,
               double lr);

}  // namespace gait
