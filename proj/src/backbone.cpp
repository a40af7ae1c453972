#include "gait/backbone.hpp"

#include <cmath>

#include "gait/kernels.hpp"

namespace gait {

long BackboneParams::out_h() const {
  long h = in_h;
  for (const auto& s : stages)
    if (s.pool) h /= 2;
  return h;
}

long BackboneParams::out_w() const {
  long w = in_w;
  for (const auto& s : stages)
    if (s.pool) w /= 2;
  return w;
}

void BackboneParams::validate_contract() const {
  require(!stages.empty(), "backbone: no stages");
  require(out_h() == 32, "backbone: composed output height is " +
                             std::to_string(out_h()) + ", contract requires 32");
  for (const auto& s : stages)
    require(s.kernels.all_finite() && s.bias.all_finite(),
            "backbone: non-finite parameter tensor");
}

std::vector<Tensor4*> BackboneParams::param_refs() {
  std::vector<Tensor4*> out;
  for (auto& s : stages) {
    out.push_back(&s.kernels);
    out.push_back(&s.bias);
  }
  return out;
}

std::vector<const Tensor4*> BackboneParams::param_refs() const {
  std::vector<const Tensor4*> out;
  for (const auto& s : stages) {
    out.push_back(&s.kernels);
    out.push_back(&s.bias);
  }
  return out;
}

std::vector<std::string> BackboneParams::param_names() const {
  std::vector<std::string> out;
  for (size_t i = 0; i < stages.size(); ++i) {
    out.push_back("stage" + std::to_string(i) + ".kernels");
    out.push_back("stage" + std::to_string(i) + ".bias");
  }
  return out;
}

BackboneParams init_params(const std::vector<long>& widths, Rng& rng) {
  require(!widths.empty(), "init_params: widths must be nonempty");
  BackboneParams p;
  long cin = 1;
  for (size_t i = 0; i < widths.size(); ++i) {
    long cout = widths[i];
    require(cout > 0, "init_params: zero channel width");
    long k = i == 0 ? 5 : 3;
    ConvStage st{Tensor4({cout, cin, k, k}), Tensor4({1, 1, 1, cout}, 0.0), i == 0};
    double fan_in = static_cast<double>(cin * k * k);
    double fan_out = static_cast<double>(cout * k * k);
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (long j = 0; j < st.kernels.size(); ++j)
      st.kernels[j] = rng.range(-bound, bound);
    p.stages.push_back(std::move(st));
    cin = cout;
  }
  p.validate_contract();
  return p;
}

Tensor4 encode_frame(const Tensor4& frame, const BackboneParams& params,
                     FrameRecord* rec) {
  require(frame.shape() == Shape4{1, 1, params.in_h, params.in_w},
          "encode_frame: expected frame (1,1," + std::to_string(params.in_h) + "," +
              std::to_string(params.in_w) + "), got " + frame.shape().str());
  if (rec) rec->stages.clear();
  Tensor4 x = frame;
  for (const auto& st : params.stages) {
    long pad = (st.kernels.h() - 1) / 2;
    Conv2dResult c = conv2d(x, st.kernels, st.bias.values(), pad);
    LeakyReluResult r = leaky_relu(c.out, kLeakySlope);
    FrameRecord::StageRecord sr{std::move(c.rec), std::move(r.rec), std::nullopt};
    if (st.pool) {
      MaxPoolResult pr = maxpool2d(r.out);
      x = std::move(pr.out);
      sr.pool = std::move(pr.rec);
    } else {
      x = std::move(r.out);
    }
    if (rec) rec->stages.push_back(std::move(sr));
  }
  return x;
}

Tensor4 set_pool(const std::vector<Tensor4>& maps, SetPoolRecord* rec) {
  require(!maps.empty(), "set_pool: empty frame list");
  Tensor4 out = maps[0];
  for (size_t i = 1; i < maps.size(); ++i)
    require(maps[i].same_shape(out), "set_pool: frame map shape mismatch");
  if (!rec) {
    for (size_t i = 1; i < maps.size(); ++i)
      simd::active().ewise_max(out.data(), maps[i].data(), out.data(),
                               static_cast<size_t>(out.size()));
    return out;
  }
  rec->map_shape = out.shape();
  rec->frame_count = static_cast<long>(maps.size());
  rec->arg_frame.assign(static_cast<size_t>(out.size()), 0);
  for (size_t i = 1; i < maps.size(); ++i)
    for (long j = 0; j < out.size(); ++j)
      if (maps[i][j] > out[j]) {
        out[j] = maps[i][j];
        rec->arg_frame[j] = static_cast<uint32_t>(i);
      }
  return out;
}

Tensor4 backbone_forward(const FrameBatch& batch, const BackboneParams& params,
                         BackboneRecord* rec) {
  require(!batch.empty(), "backbone_forward: empty batch");
  size_t f = batch[0].size();
  for (const auto& seq : batch)
    require(seq.size() == f && f > 0,
            "backbone_forward: ragged frame counts in batch");
  if (rec) {
    rec->frames.assign(batch.size(), {});
    rec->pools.assign(batch.size(), {});
  }
  long n = static_cast<long>(batch.size());
  Tensor4 out;
  for (long b = 0; b < n; ++b) {
    std::vector<Tensor4> maps;
    maps.reserve(f);
    if (rec) rec->frames[b].resize(f);
    for (size_t i = 0; i < f; ++i)
      maps.push_back(encode_frame(batch[b][i], params,
                                  rec ? &rec->frames[b][i] : nullptr));
    Tensor4 pooled = set_pool(maps, rec ? &rec->pools[b] : nullptr);
    if (b == 0)
      out = Tensor4({n, pooled.c(), pooled.h(), pooled.w()});
    for (long j = 0; j < pooled.size(); ++j) out[b * pooled.size() + j] = pooled[j];
  }
  return out;
}

std::vector<const Tensor4*> ParamGrads::refs() const {
  std::vector<const Tensor4*> out;
  for (size_t i = 0; i < d_kernels.size(); ++i) {
    out.push_back(&d_kernels[i]);
    out.push_back(&d_bias[i]);
  }
  return out;
}

namespace {

// One frame's contribution to the parameter gradients.
void frame_backward(const FrameRecord& rec, const Tensor4& grad_map,
                    ParamGrads& acc) {
  Tensor4 g = grad_map;
  for (long s = static_cast<long>(rec.stages.size()) - 1; s >= 0; --s) {
    const auto& sr = rec.stages[s];
    if (sr.pool) g = maxpool2d_backward(*sr.pool, g);
    g = leaky_relu_backward(sr.relu, g);
    Conv2dGrads cg = conv2d_backward(sr.conv, g);
    for (long j = 0; j < cg.d_kernels.size(); ++j)
      acc.d_kernels[s][j] += cg.d_kernels[j];
    for (long j = 0; j < static_cast<long>(cg.d_bias.size()); ++j)
      acc.d_bias[s][j] += cg.d_bias[j];
    g = std::move(cg.d_input);
  }
}

}  // namespace

ParamGrads backbone_backward(const BackboneRecord& rec, const BackboneParams& params,
                             const Tensor4& grad_out) {
  ParamGrads acc;
  for (const auto& st : params.stages) {
    acc.d_kernels.emplace_back(st.kernels.shape());
    acc.d_bias.emplace_back(st.bias.shape());
  }
  long n = static_cast<long>(rec.pools.size());
  require(grad_out.n() == n, "backbone_backward: grad batch size mismatch");
  long per = grad_out.size() / n;
  for (long b = 0; b < n; ++b) {
    const SetPoolRecord& pr = rec.pools[b];
    require(pr.map_shape.size() == per, "backbone_backward: pooled shape mismatch");
    // route each element's gradient to the frame that won the set max
    std::vector<Tensor4> frame_grads;
    for (long i = 0; i < pr.frame_count; ++i) frame_grads.emplace_back(pr.map_shape);
    for (long j = 0; j < per; ++j)
      frame_grads[pr.arg_frame[j]][j] += grad_out[b * per + j];
    for (long i = 0; i < pr.frame_count; ++i)
      frame_backward(rec.frames[b][i], frame_grads[i], acc);
  }
  return acc;
}

}  // namespace gait
