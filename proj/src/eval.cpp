#include "gait/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "gait/hd.hpp"
#include "gait/kernels.hpp"

namespace gait {

namespace {

constexpr std::array<Condition, 3> kConditions = {Condition::NM, Condition::BG,
                                                  Condition::CL};

bool is_gallery(const FeatureRow& r) {
  return r.condition == Condition::NM && r.seq_index >= 1 && r.seq_index <= 4;
}

bool is_probe(const FeatureRow& r, Condition cond, bool include_nm04) {
  if (r.condition != cond) return false;
  if (cond == Condition::NM)
    return r.seq_index >= 5 || (include_nm04 && r.seq_index == 4);
  return true;
}

std::vector<int> collect_views(const FeatureTable& features) {
  std::set<int> vs;
  for (const auto& r : features) vs.insert(r.view);
  return {vs.begin(), vs.end()};
}

// index of the nearest row among candidates; first index wins ties
long nearest(const FeatureTable& features, const std::vector<long>& candidates,
             const std::vector<double>& probe) {
  const auto& K = simd::active();
  long best = -1;
  double best_d = 0.0;
  for (long c : candidates) {
    double d = K.sq_dist(probe.data(), features[c].feat.data(), probe.size());
    if (best < 0 || d < best_d) {
      best = c;
      best_d = d;
    }
  }
  return best;
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

FeatureTable extract_features(const BackboneParams& params, DatasetIndex& set,
                              long frame_cap) {
  params.validate_contract();
  FeatureTable table;
  HdConfig hd;
  hd.mode = HdMode::Eval;
  Rng unused(0);
  for (const std::string& sid : set.subjects)
    for (GaitSequence& seq : set.sequences.at(sid)) {
      const auto& frames = frames_of(seq);
      long f = std::min<long>(static_cast<long>(frames.size()), frame_cap);
      FrameBatch batch(1);
      for (long i = 0; i < f; ++i) batch[0].push_back(frame_to_tensor(frames[i]));
      Tensor4 in = backbone_forward(batch, params);
      HdResult hr = hd_forward(in, hd, unused);
      FeatureRow row{sid, seq.condition, seq.seq_index, seq.view,
                     std::vector<double>(hr.sum.data(), hr.sum.data() + hr.sum.size())};
      table.push_back(std::move(row));
    }
  return table;
}

EvalReport rank1_cross_view(const FeatureTable& features, bool include_nm04_probe) {
  EvalReport rep;
  rep.protocol = "cross-view";
  rep.views = collect_views(features);
  long nv = static_cast<long>(rep.views.size());

  std::set<std::string> subjects;
  for (const auto& r : features) subjects.insert(r.subject_id);
  rep.degenerate = subjects.size() < 2;

  for (size_t ci = 0; ci < kConditions.size(); ++ci) {
    ViewMatrix& m = rep.matrices[ci];
    m.views = rep.views;
    m.cells.assign(nv * nv, 0.0);
    m.present.assign(nv * nv, 0);
    double acc_sum = 0.0;
    long acc_cells = 0;
    for (long vp = 0; vp < nv; ++vp)
      for (long vg = 0; vg < nv; ++vg) {
        if (vg == vp) continue;
        std::vector<long> gallery, probes;
        for (long i = 0; i < static_cast<long>(features.size()); ++i) {
          if (features[i].view == rep.views[vg] && is_gallery(features[i]))
            gallery.push_back(i);
          if (features[i].view == rep.views[vp] &&
              is_probe(features[i], kConditions[ci], include_nm04_probe))
            probes.push_back(i);
        }
        if (gallery.empty() || probes.empty()) {
          rep.warnings.push_back("empty cell: " + condition_name(kConditions[ci]) +
                                 " probe view " + std::to_string(rep.views[vp]) +
                                 " gallery view " + std::to_string(rep.views[vg]));
          continue;
        }
        long hits = 0;
        for (long p : probes) {
          long g = nearest(features, gallery, features[p].feat);
          if (features[g].subject_id == features[p].subject_id) ++hits;
        }
        double cell = 100.0 * hits / probes.size();
        m.cell(vp, vg) = cell;
        m.present[vp * nv + vg] = 1;
        acc_sum += cell;
        ++acc_cells;
      }
    rep.condition_acc[ci] = acc_cells > 0 ? acc_sum / acc_cells : 0.0;
  }
  rep.average = (rep.condition_acc[0] + rep.condition_acc[1] + rep.condition_acc[2]) / 3.0;
  return rep;
}

EvalReport rank1_reid(const FeatureTable& features, bool include_nm04_probe) {
  EvalReport rep;
  rep.protocol = "reid";
  rep.views = collect_views(features);

  std::set<std::string> subjects;
  for (const auto& r : features) subjects.insert(r.subject_id);
  rep.degenerate = subjects.size() < 2;

  std::vector<long> gallery;
  for (long i = 0; i < static_cast<long>(features.size()); ++i)
    if (is_gallery(features[i])) gallery.push_back(i);

  for (size_t ci = 0; ci < kConditions.size(); ++ci) {
    long hits = 0, probes = 0;
    for (long p = 0; p < static_cast<long>(features.size()); ++p) {
      if (!is_probe(features[p], kConditions[ci], include_nm04_probe)) continue;
      std::vector<long> cand;
      for (long g : gallery) {
        const FeatureRow& gr = features[g];
        const FeatureRow& pr = features[p];
        bool identical = gr.subject_id == pr.subject_id &&
                         gr.condition == pr.condition &&
                         gr.seq_index == pr.seq_index && gr.view == pr.view;
        if (!identical) cand.push_back(g);
      }
      if (cand.empty()) {
        rep.warnings.push_back("no gallery candidates for a probe of " +
                               condition_name(kConditions[ci]));
        continue;
      }
      long g = nearest(features, cand, features[p].feat);
      if (features[g].subject_id == features[p].subject_id) ++hits;
      ++probes;
    }
    rep.condition_acc[ci] = probes > 0 ? 100.0 * hits / probes : 0.0;
  }
  rep.average = (rep.condition_acc[0] + rep.condition_acc[1] + rep.condition_acc[2]) / 3.0;
  return rep;
}

std::vector<SweepRow> sweep(const std::vector<long>& drop_numbers,
                            const TrainConfig& cfg, DatasetIndex& train_set,
                            DatasetIndex& test_set, const std::string& protocol,
                            const std::filesystem::path& csv_path) {
  require(protocol == "cross-view" || protocol == "reid",
          "sweep: protocol must be cross-view or reid");
  for (long d : drop_numbers)
    require(d >= 0 && d <= 32, "sweep: drop_number " + std::to_string(d) +
                                   " outside [0,32]");
  std::vector<SweepRow> rows;
  for (long d : drop_numbers) {
    TrainConfig point = cfg;
    point.hd.drop_number = d;
    TrainResult tr = train_loop(point, train_set);
    FeatureTable feats = extract_features(tr.checkpoint.params, test_set);
    EvalReport rep = protocol == "cross-view" ? rank1_cross_view(feats)
                                              : rank1_reid(feats);
    rows.push_back({d, rep.condition_acc[0], rep.condition_acc[1],
                    rep.condition_acc[2], rep.average});
    if (!csv_path.empty()) write_report(rows, csv_path);
  }
  return rows;
}

void write_report(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write report " + path.string());
  out << "drop_number,NM,BG,CL,Average\n";
  for (const auto& r : rows)
    out << r.drop_number << "," << fmt3(r.nm) << "," << fmt3(r.bg) << ","
        << fmt3(r.cl) << "," << fmt3(r.average) << "\n";
}

void write_eval_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write report " + path.string());
  out << "NM,BG,CL,Average\n"
      << fmt3(report.condition_acc[0]) << "," << fmt3(report.condition_acc[1]) << ","
      << fmt3(report.condition_acc[2]) << "," << fmt3(report.average) << "\n";
}

void write_matrix_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write report " + path.string());
  out << "condition,probe_view,gallery_view,rank1\n";
  long nv = static_cast<long>(report.views.size());
  for (size_t ci = 0; ci < kConditions.size(); ++ci) {
    const ViewMatrix& m = report.matrices[ci];
    if (m.cells.empty()) continue;
    for (long vp = 0; vp < nv; ++vp)
      for (long vg = 0; vg < nv; ++vg)
        if (m.present[vp * nv + vg])
          out << condition_name(kConditions[ci]) << "," << report.views[vp] << ","
              << report.views[vg] << "," << fmt3(m.cell(vp, vg)) << "\n";
  }
}

}  // namespace gait
