#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gait/rng.hpp"
#include "gait/tensor.hpp"

namespace gait {

struct Image {
  long h = 0, w = 0;
  std::vector<uint8_t> px;  // row-major grayscale

  uint8_t at(long y, long x) const { return px[y * w + x]; }
  uint8_t& at(long y, long x) { return px[y * w + x]; }
};

enum class Condition { NM, BG, CL };

std::string condition_name(Condition c);
Condition parse_condition(const std::string& s);

/// The 10 capture names of CASIA-B: nm-01..06, bg-01/02, cl-01/02.
const std::vector<std::pair<Condition, int>>& capture_list();

/// The 11 CASIA-B view angles, 0..180 in 18-degree steps.
const std::vector<int>& casia_views();

struct GaitSequence {
  std::string subject_id;
  Condition condition = Condition::NM;
  int seq_index = 1;
  int view = 0;
  std::vector<Image> frames;                      // 64x44, preprocessed
  std::vector<std::filesystem::path> frame_files; // lazy source, if on disk

  std::string capture_name() const;
};

struct DatasetIndex {
  std::vector<std::string> subjects;  // lexicographic, stable
  std::map<std::string, std::vector<GaitSequence>> sequences;
  std::vector<std::string> skip_report;

  long subject_count() const { return static_cast<long>(subjects.size()); }
};

/// Preprocessed frames of a sequence, loading and caching from disk when
/// the sequence was indexed lazily.
const std::vector<Image>& frames_of(GaitSequence& seq);

/// Index a <root>/<subject>/<cond>-<seq>/<view>/<name>.png tree. Unparseable
/// entries and zero-frame sequences go to the skip report.
DatasetIndex index_casia_b(const std::filesystem::path& root);

/// First 74 subjects train when the set is full-size (>= 75 subjects),
/// otherwise first ceil(0.6 n); order-preserving partition.
std::pair<DatasetIndex, DatasetIndex> split_lt(const DatasetIndex& index);

/// Crop to the tight vertical bounding box, scale to height 64 preserving
/// aspect, center horizontally on the silhouette centroid, pad/crop width
/// to 44. Idempotent on conformant frames. Rejects all-zero images.
Image preprocess_silhouette(const Image& img);

struct SynthSpec {
  long subjects = 20;
  std::vector<int> views = {0, 18, 36, 54, 72, 90, 108, 126, 144, 162, 180};
  long frames_per_seq = 16;
};

/// Deterministic parametric walker corpus in the CASIA-B capture layout:
/// per-subject body proportions, view-dependent apparent width, BG adds a
/// bag blob, CL widens the torso, gait phase advances per frame.
DatasetIndex synth_dataset(const SynthSpec& spec, uint64_t seed);

/// Write a dataset to disk in the CASIA-B layout (8-bit grayscale PNG).
void export_dataset(DatasetIndex& index, const std::filesystem::path& dir);

/// Uniform subset of frame indices in temporal order; with replacement only
/// when the sequence is shorter than count.
std::vector<long> sample_frame_indices(long len, long count, Rng& rng);

Image read_png_gray(const std::filesystem::path& path);
void write_png_gray(const std::filesystem::path& path, const Image& img);

/// (1, 1, h, w) tensor with values px/255 in [0, 1].
Tensor4 frame_to_tensor(const Image& img);

}  // namespace gait
