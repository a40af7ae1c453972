#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gait/tensor.hpp"

namespace gait {

struct GradCheck {
  std::string name;
  bool ok = false;
  double max_rel_err = 0.0;
  long instances = 0;
};

/// Central finite differences of a scalar objective against an analytic
/// gradient, coordinate by coordinate (optionally on a sampled subset).
/// Relative error denominator is max(1, |analytic|).
struct FdCheck {
  double step = 1e-6;
  double tolerance = 1e-5;

  double max_rel_err = 0.0;

  bool compare(const std::function<double(const Tensor4&)>& phi, Tensor4 point,
               const Tensor4& analytic, const std::vector<long>& coords = {});
};

/// Every differentiable op plus the end-to-end backbone+HD composition with a
/// fixed mask, at kink-free points (inputs are resampled away from ties).
std::vector<GradCheck> run_gradient_suite(uint64_t seed, long instances = 20,
                                          double step = 1e-6, double tol = 1e-5);

}  // namespace gait
