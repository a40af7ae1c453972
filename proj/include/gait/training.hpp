#pragma once

#include <string>
#include <vector>

#include "gait/backbone.hpp"
#include "gait/checkpoint.hpp"
#include "gait/data.hpp"
#include "gait/hd.hpp"
#include "gait/optimizer.hpp"

namespace gait {

struct TrainConfig {
  double learning_rate = 0.001;
  double margin = 0.2;
  long batch_p = 11;
  long batch_k = 16;
  long frame_number = 30;
  long iterations = 0;
  uint64_t seed = 0;
  std::vector<long> widths = {8, 16, 32};
  HdConfig hd;

  void validate() const;
};

struct BatchItem {
  long label = 0;  // subject index within the batch's subject draw
  std::string subject_id;
  GaitSequence* seq = nullptr;
  std::vector<long> frame_idx;
};

/// p distinct subjects, k sequences each (with replacement only when a
/// subject has fewer than k), frame_number frames per sequence.
std::vector<BatchItem> sample_pk_batch(DatasetIndex& train_set, long p, long k,
                                       long frame_number, Rng& rng);

/// n x n Euclidean distance matrix, row-major.
std::vector<double> pairwise_euclidean(const std::vector<std::vector<double>>& feats);

struct TripletLossResult {
  double loss = 0.0;
  long active_count = 0;
  std::vector<double> d_dist;  // gradient w.r.t. the distance matrix
};

/// Batch-all hinge over every (anchor, positive, negative) triplet, averaged
/// over the margin-violating ones.
TripletLossResult triplet_loss_batch_all(const std::vector<double>& dist, long n,
                                         const std::vector<long>& labels,
                                         double margin);

/// Chain d_dist through d(i,j) = |f_i - f_j| back to the feature vectors.
std::vector<std::vector<double>> pairwise_euclidean_backward(
    const std::vector<std::vector<double>>& feats, const std::vector<double>& dist,
    const std::vector<double>& d_dist);

struct LossPoint {
  long iteration = 0;
  double loss = 0.0;
  long active_triplets = 0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossPoint> trace;
};

/// Full metric-learning loop; deterministic given (cfg.seed, cfg, dataset).
/// HD masks draw from their own seeded stream, so batch composition is
/// identical across drop numbers and with HD disabled.
TrainResult train_loop(const TrainConfig& cfg, DatasetIndex& train_set);

void write_loss_trace(const std::vector<LossPoint>& trace,
                      const std::filesystem::path& path);

}  // namespace gait
