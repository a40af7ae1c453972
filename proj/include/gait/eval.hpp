#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "gait/data.hpp"
#include "gait/training.hpp"

namespace gait {

struct FeatureRow {
  std::string subject_id;
  Condition condition = Condition::NM;
  int seq_index = 1;
  int view = 0;
  std::vector<double> feat;
};

using FeatureTable = std::vector<FeatureRow>;

/// Eval-mode features (no dropping): up to frame_cap frames in temporal
/// order, backbone + width max/mean sum, flattened to c*h.
FeatureTable extract_features(const BackboneParams& params, DatasetIndex& set,
                              long frame_cap = 100);

struct ViewMatrix {
  std::vector<int> views;
  std::vector<double> cells;     // probe-major, views.size()^2
  std::vector<uint8_t> present;  // absent cells are excluded from means

  double& cell(long p, long g) { return cells[p * views.size() + g]; }
  double cell(long p, long g) const { return cells[p * views.size() + g]; }
};

struct EvalReport {
  std::string protocol;                   // "cross-view" | "reid"
  std::vector<int> views;
  std::array<ViewMatrix, 3> matrices;     // NM, BG, CL (cross-view only)
  std::array<double, 3> condition_acc{};  // percent
  double average = 0.0;
  bool degenerate = false;  // e.g. single-subject test set
  std::vector<std::string> warnings;
};

/// Gallery nm-01..04; per condition, rank-1 per (probe view, gallery view)
/// pair with identical views excluded; condition accuracy averages the
/// present off-diagonal cells. NM probes default to nm-05/06; the paper's
/// literal list also names nm-04, selectable via include_nm04_probe.
EvalReport rank1_cross_view(const FeatureTable& features,
                            bool include_nm04_probe = false);

/// Probes matched against the pooled multi-view nm-01..04 gallery, the
/// identical capture excluded; accuracy per condition over all views jointly.
EvalReport rank1_reid(const FeatureTable& features, bool include_nm04_probe = false);

struct SweepRow {
  long drop_number = 0;
  double nm = 0.0, bg = 0.0, cl = 0.0, average = 0.0;
};

/// Train at each drop number from the same seed, evaluate, emit one row per
/// d. Rows are appended to csv_path (when given) as they finish, so a failed
/// point preserves the completed ones.
std::vector<SweepRow> sweep(const std::vector<long>& drop_numbers,
                            const TrainConfig& cfg, DatasetIndex& train_set,
                            DatasetIndex& test_set, const std::string& protocol,
                            const std::filesystem::path& csv_path = {});

/// CSV `drop_number,NM,BG,CL,Average`, three decimals, deterministic bytes.
void write_report(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

/// One-row CSV `NM,BG,CL,Average` for a single evaluation.
void write_eval_csv(const EvalReport& report, const std::filesystem::path& path);

/// Per-view cells as `condition,probe_view,gallery_view,rank1`.
void write_matrix_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace gait
