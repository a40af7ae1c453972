#include "gait/hd.hpp"

namespace gait {

std::vector<long> DropMask::rows() const {
  std::vector<long> out;
  for (long r = 0; r < height; ++r)
    if (dropped[r]) out.push_back(r);
  return out;
}

DropMask make_chd_mask(long h, long d, Rng& rng) {
  require(h >= 1, "make_chd_mask: h must be >= 1");
  require(d >= 0 && d <= h, "make_chd_mask: drop_number " + std::to_string(d) +
                                " exceeds height " + std::to_string(h));
  DropMask m{h, d, HdStructure::CHD, rng.index(h), std::vector<uint8_t>(h, 0)};
  for (long i = 0; i < d; ++i) m.dropped[(m.start + i) % h] = 1;
  return m;
}

DropMask make_shd_mask(long h, long d, Rng& rng) {
  require(h >= 1, "make_shd_mask: h must be >= 1");
  require(d >= 0 && d <= h, "make_shd_mask: drop_number " + std::to_string(d) +
                                " exceeds height " + std::to_string(h));
  DropMask m{h, d, HdStructure::SHD, -1, std::vector<uint8_t>(h, 0)};
  for (long r : rng.sample_without_replacement(h, d)) m.dropped[r] = 1;
  return m;
}

DropMask fixed_mask(long h, const std::vector<long>& rows, HdStructure structure) {
  DropMask m{h, static_cast<long>(rows.size()), structure, -1,
             std::vector<uint8_t>(h, 0)};
  for (long r : rows) {
    require(r >= 0 && r < h, "fixed_mask: row out of range");
    m.dropped[r] = 1;
  }
  return m;
}

Tensor4 apply_row_mask(const Tensor4& t, const std::vector<DropMask>& masks,
                       bool rescale) {
  const Shape4& s = t.shape();
  bool broadcast = masks.size() == 1;
  require(broadcast || static_cast<long>(masks.size()) == s.n,
          "apply_row_mask: need 1 or n masks, got " + std::to_string(masks.size()));
  Tensor4 out = t;
  for (long b = 0; b < s.n; ++b) {
    const DropMask& m = masks[broadcast ? 0 : b];
    require(m.height == s.h, "apply_row_mask: mask height " + std::to_string(m.height) +
                                 " vs tensor h " + std::to_string(s.h));
    double keep = 1.0;
    if (rescale && m.drop_number < m.height)
      keep = static_cast<double>(m.height) / static_cast<double>(m.height - m.drop_number);
    for (long ci = 0; ci < s.c; ++ci)
      for (long y = 0; y < s.h; ++y) {
        double* row = out.data() + out.idx(b, ci, y, 0);
        if (m.is_dropped(y)) {
          for (long x = 0; x < s.w; ++x) row[x] = 0.0;
        } else if (keep != 1.0) {
          for (long x = 0; x < s.w; ++x) row[x] *= keep;
        }
      }
  }
  return out;
}

HdResult hd_forward(const Tensor4& in, const HdConfig& cfg, Rng& rng) {
  if (cfg.enabled && cfg.mode == HdMode::Train)
    require(cfg.drop_number <= in.h(),
            "hd_forward: drop_number " + std::to_string(cfg.drop_number) +
                " exceeds feature height " + std::to_string(in.h()));
  ReduceResult mx = reduce_max(in, 3);
  ReduceResult mn = reduce_mean(in, 3);

  HdResult r;
  r.rec.in_shape = in.shape();
  r.rec.rescale = cfg.rescale;
  if (cfg.enabled && cfg.mode == HdMode::Train && cfg.drop_number > 0) {
    long count = cfg.scope == MaskScope::PerSample ? in.n() : 1;
    for (long i = 0; i < count; ++i)
      r.masks.push_back(cfg.structure == HdStructure::CHD
                            ? make_chd_mask(in.h(), cfg.drop_number, rng)
                            : make_shd_mask(in.h(), cfg.drop_number, rng));
    Tensor4 mxd = apply_row_mask(mx.out, r.masks, cfg.rescale);
    Tensor4 mnd = apply_row_mask(mn.out, r.masks, cfg.rescale);
    r.sum = add(mxd, mnd);
  } else {
    r.sum = add(mx.out, mn.out);
  }
  r.rec.max_rec = std::move(mx.rec);
  r.rec.masks = r.masks;
  return r;
}

Tensor4 hd_backward(const HdRecord& rec, const Tensor4& grad_sum) {
  require(grad_sum.shape() == Shape4{rec.in_shape.n, rec.in_shape.c, rec.in_shape.h, 1},
          "hd_backward: grad_sum " + grad_sum.shape().str() + " does not match record");
  Tensor4 g = rec.masks.empty() ? grad_sum
                                : apply_row_mask(grad_sum, rec.masks, rec.rescale);
  Tensor4 gmax = reduce_max_backward(rec.max_rec, g);
  ReduceRecord mean_rec{rec.in_shape, 3, {}};
  Tensor4 gmean = reduce_mean_backward(mean_rec, g);
  return add(gmax, gmean);
}

Tensor4 placement_variant(const Tensor4& in, const DropMask& mask, Placement option) {
  std::vector<DropMask> ms{mask};
  switch (option) {
    case Placement::MaskInput: {
      Tensor4 masked = apply_row_mask(in, ms);
      return add(reduce_max(masked, 3).out, reduce_mean(masked, 3).out);
    }
    case Placement::MaskReduced: {
      Tensor4 mx = apply_row_mask(reduce_max(in, 3).out, ms);
      Tensor4 mn = apply_row_mask(reduce_mean(in, 3).out, ms);
      return add(mx, mn);
    }
    default: {
      Tensor4 sum = add(reduce_max(in, 3).out, reduce_mean(in, 3).out);
      return apply_row_mask(sum, ms);
    }
  }
}

}  // namespace gait
