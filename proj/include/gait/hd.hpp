#pragma once

#include <vector>

#include "gait/ops.hpp"
#include "gait/rng.hpp"
#include "gait/tensor.hpp"

namespace gait {

// Horizontal Dropout over the width-reduced feature map: Max and Mean are
// taken along the width axis, d entire rows of height are zeroed (the same
// rows in both), and the two are summed into the per-sequence feature.

enum class HdStructure { CHD, SHD };
enum class HdMode { Train, Eval };
enum class MaskScope { PerSample, PerBatch };

struct DropMask {
  long height = 0;
  long drop_number = 0;
  HdStructure structure = HdStructure::CHD;
  long start = -1;                // CHD only
  std::vector<uint8_t> dropped;   // one flag per row

  std::vector<long> rows() const;
  bool is_dropped(long row) const { return dropped[row] != 0; }
};

struct HdConfig {
  HdStructure structure = HdStructure::CHD;
  long drop_number = 0;
  HdMode mode = HdMode::Train;
  MaskScope scope = MaskScope::PerSample;
  bool rescale = false;  // kept rows scaled by h/(h-d) when on
  bool enabled = true;   // off removes the mask stage entirely (baseline builds)
};

/// d consecutive rows modulo h starting at a uniformly random row; rows past
/// the bottom wrap to the top.
DropMask make_chd_mask(long h, long d, Rng& rng);

/// d distinct rows drawn uniformly without replacement.
DropMask make_shd_mask(long h, long d, Rng& rng);

/// Fixed mask with the given dropped rows (tests and placement variants).
DropMask fixed_mask(long h, const std::vector<long>& rows, HdStructure structure);

/// Zero the dropped rows of each sample across all channels and width.
/// masks has one entry per sample, or a single entry broadcast to the batch.
Tensor4 apply_row_mask(const Tensor4& t, const std::vector<DropMask>& masks,
                       bool rescale = false);

struct HdRecord {
  Shape4 in_shape;
  ReduceRecord max_rec;
  std::vector<DropMask> masks;  // empty in eval mode / disabled
  bool rescale = false;
};

struct HdResult {
  Tensor4 sum;                  // (n, c, h, 1)
  std::vector<DropMask> masks;  // the masks actually applied
  HdRecord rec;
};

/// Max + Mean along width, rows dropped in train mode per cfg, then summed.
/// Eval mode applies no mask and consumes no randomness.
HdResult hd_forward(const Tensor4& in, const HdConfig& cfg, Rng& rng);

Tensor4 hd_backward(const HdRecord& rec, const Tensor4& grad_sum);

/// The three equivalent mask placements: before the reductions, after them
/// (on Max and Mean separately), or on the final Sum.
enum class Placement { MaskInput, MaskReduced, MaskSum };

Tensor4 placement_variant(const Tensor4& in, const DropMask& mask, Placement option);

}  // namespace gait
