#pragma once

#include <optional>
#include <vector>

#include "gait/ops.hpp"
#include "gait/rng.hpp"
#include "gait/tensor.hpp"

namespace gait {

inline constexpr long kFrameH = 64;
inline constexpr long kFrameW = 44;
inline constexpr double kLeakySlope = 0.01;

struct ConvStage {
  Tensor4 kernels;  // (cout, cin, k, k)
  Tensor4 bias;     // (1, 1, 1, cout)
  bool pool = false;
};

/// Stand-in frame encoder: conv -> leaky_relu -> (2x2 maxpool on the first
/// stage only), "same" padding throughout. One pool halves 64 to the
/// contract height of 32.
struct BackboneParams {
  std::vector<ConvStage> stages;
  long in_h = kFrameH;
  long in_w = kFrameW;

  long out_channels() const { return stages.back().kernels.n(); }
  long out_h() const;
  long out_w() const;
  long feature_dim() const { return out_channels() * out_h(); }

  /// Throws unless the composed output height is exactly 32.
  void validate_contract() const;

  std::vector<Tensor4*> param_refs();
  std::vector<const Tensor4*> param_refs() const;
  std::vector<std::string> param_names() const;
};

/// Kernels uniform in +-sqrt(6/(fan_in+fan_out)), biases zero. First stage
/// uses a 5x5 kernel and pools; the rest are 3x3 without pooling.
BackboneParams init_params(const std::vector<long>& widths, Rng& rng);

struct FrameRecord {
  struct StageRecord {
    Conv2dRecord conv;
    LeakyReluRecord relu;
    std::optional<MaxPoolRecord> pool;
  };
  std::vector<StageRecord> stages;
};

/// frame is (1, 1, 64, 44) with values in [0, 1].
Tensor4 encode_frame(const Tensor4& frame, const BackboneParams& params,
                     FrameRecord* rec = nullptr);

struct SetPoolRecord {
  Shape4 map_shape;
  long frame_count = 0;
  std::vector<uint32_t> arg_frame;  // winning frame per element, first on ties
};

/// Elementwise maximum over per-frame feature maps (permutation-invariant).
Tensor4 set_pool(const std::vector<Tensor4>& maps, SetPoolRecord* rec = nullptr);

struct BackboneRecord {
  std::vector<std::vector<FrameRecord>> frames;  // [sample][frame]
  std::vector<SetPoolRecord> pools;              // [sample]
};

using FrameBatch = std::vector<std::vector<Tensor4>>;  // [sample][frame]

/// Per-frame encode, set pooling per sequence, stacked along n.
Tensor4 backbone_forward(const FrameBatch& batch, const BackboneParams& params,
                         BackboneRecord* rec = nullptr);

struct ParamGrads {
  std::vector<Tensor4> d_kernels;
  std::vector<Tensor4> d_bias;

  std::vector<const Tensor4*> refs() const;
};

ParamGrads backbone_backward(const BackboneRecord& rec, const BackboneParams& params,
                             const Tensor4& grad_out);

}  // namespace gait
