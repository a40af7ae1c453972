#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gait/backbone.hpp"
#include "gait/optimizer.hpp"
#include "gait/tensor.hpp"

namespace gait {

// On-disk checkpoint: manifest.json (tensor names, shapes, byte offsets,
// backbone geometry) plus params.bin, raw little-endian 64-bit floats.
// Round-trips are bit-exact.

struct Checkpoint {
  BackboneParams params;
  std::optional<AdamState> opt;
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace gait
