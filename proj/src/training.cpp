#include "gait/training.hpp"

#include <cmath>
#include <utility>
#include <fstream>

#include "gait/kernels.hpp"

namespace gait {

void TrainConfig::validate() const {
  require(learning_rate > 0.0, "config: learning_rate must be > 0");
  require(margin > 0.0, "config: margin must be > 0");
  require(batch_p >= 2, "config: batch_p must be >= 2");
  require(batch_k >= 2, "config: batch_k must be >= 2");
  require(frame_number >= 1, "config: frame_number must be >= 1");
  require(iterations >= 0, "config: iterations must be >= 0");
  require(!widths.empty(), "config: widths must be nonempty");
  require(hd.drop_number >= 0 && hd.drop_number <= 32,
          "config: drop_number must be in [0,32] (backbone height is 32)");
}

std::vector<BatchItem> sample_pk_batch(DatasetIndex& train_set, long p, long k,
                                       long frame_number, Rng& rng) {
  long ns = train_set.subject_count();
  require(ns >= p, "sample_pk_batch: dataset has " + std::to_string(ns) +
                       " subjects, need " + std::to_string(p));
  std::vector<long> picked = rng.sample_without_replacement(ns, p);
  std::vector<BatchItem> batch;
  for (long pi = 0; pi < p; ++pi) {
    const std::string& sid = train_set.subjects[picked[pi]];
    auto& seqs = train_set.sequences.at(sid);
    long nq = static_cast<long>(seqs.size());
    std::vector<long> chosen;
    if (nq >= k) {
      chosen = rng.sample_without_replacement(nq, k);
    } else {
      for (long i = 0; i < k; ++i) chosen.push_back(rng.index(nq));
    }
    for (long qi : chosen) {
      GaitSequence& seq = seqs[qi];
      BatchItem item;
      item.label = pi;
      item.subject_id = sid;
      item.seq = &seq;
      long len = static_cast<long>(frames_of(seq).size());
      item.frame_idx = sample_frame_indices(len, frame_number, rng);
      batch.push_back(std::move(item));
    }
  }
  return batch;
}

std::vector<double> pairwise_euclidean(const std::vector<std::vector<double>>& feats) {
  long n = static_cast<long>(feats.size());
  std::vector<double> dist(n * n, 0.0);
  const auto& K = simd::active();
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j) {
      double d = std::sqrt(
          K.sq_dist(feats[i].data(), feats[j].data(), feats[i].size()));
      dist[i * n + j] = d;
      dist[j * n + i] = d;
    }
  return dist;
}

TripletLossResult triplet_loss_batch_all(const std::vector<double>& dist, long n,
                                         const std::vector<long>& labels,
                                         double margin) {
  require(static_cast<long>(labels.size()) == n &&
              static_cast<long>(dist.size()) == n * n,
          "triplet_loss: size mismatch");
  bool has_pos = false, has_two_labels = false;
  for (long i = 0; i < n && !(has_pos && has_two_labels); ++i)
    for (long j = 0; j < n; ++j) {
      if (j != i && labels[j] == labels[i]) has_pos = true;
      if (labels[j] != labels[i]) has_two_labels = true;
    }
  require(has_pos && has_two_labels, "triplet_loss: no valid triplet in batch");

  TripletLossResult r;
  r.d_dist.assign(n * n, 0.0);
  double total = 0.0;
  for (long a = 0; a < n; ++a)
    for (long p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (long q = 0; q < n; ++q) {
        if (labels[q] == labels[a]) continue;
        double term = margin + dist[a * n + p] - dist[a * n + q];
        if (term > 0.0) {
          total += term;
          ++r.active_count;
          r.d_dist[a * n + p] += 1.0;
          r.d_dist[a * n + q] -= 1.0;
        }
      }
    }
  if (r.active_count > 0) {
    r.loss = total / r.active_count;
    double inv = 1.0 / r.active_count;
    for (double& g : r.d_dist) g *= inv;
  }
  return r;
}

std::vector<std::vector<double>> pairwise_euclidean_backward(
    const std::vector<std::vector<double>>& feats, const std::vector<double>& dist,
    const std::vector<double>& d_dist) {
  long n = static_cast<long>(feats.size());
  size_t dim = feats.empty() ? 0 : feats[0].size();
  std::vector<std::vector<double>> g(n, std::vector<double>(dim, 0.0));
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      double gd = d_dist[i * n + j];
      if (gd == 0.0 || dist[i * n + j] == 0.0) continue;  // subgradient 0 at d=0
      double s = gd / dist[i * n + j];
      for (size_t t = 0; t < dim; ++t) {
        double diff = feats[i][t] - feats[j][t];
        g[i][t] += s * diff;
        g[j][t] -= s * diff;
      }
    }
  return g;
}

AdamState AdamState::init(const std::vector<const Tensor4*>& params) {
  AdamState s;
  for (const Tensor4* p : params) {
    s.m.emplace_back(p->shape());
    s.v.emplace_back(p->shape());
  }
  return s;
}

void adam_step(const std::vector<Tensor4*>& params,
               const std::vector<const Tensor4*>& grads, AdamState& state,
               double lr) {
  require(params.size() == grads.size() && params.size() == state.m.size(),
          "adam_step: parameter/gradient count mismatch");
  for (const Tensor4* g : grads)
    if (!g->all_finite())
      throw NumericError("adam_step: non-finite gradient, step rejected");
  ++state.step;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t t = 0; t < params.size(); ++t) {
    Tensor4& p = *params[t];
    const Tensor4& g = *grads[t];
    Tensor4& m = state.m[t];
    Tensor4& v = state.v[t];
    for (long i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

TrainResult train_loop(const TrainConfig& cfg, DatasetIndex& train_set) {
  cfg.validate();
  require(train_set.subject_count() > 0, "train_loop: empty training set");

  Rng data_rng(cfg.seed);
  Rng init_rng(cfg.seed ^ 0x5eedbeefULL);
  // HD draws from its own stream so batch composition does not depend on the
  // drop number (the d=0 run is bit-identical to a no-HD build)
  Rng hd_rng(cfg.seed ^ 0xd509f3a1c2b4e687ULL);

  TrainResult result;
  result.checkpoint.params = init_params(cfg.widths, init_rng);
  BackboneParams& params = result.checkpoint.params;
  AdamState opt = AdamState::init(std::as_const(params).param_refs());

  HdConfig hd = cfg.hd;
  hd.mode = HdMode::Train;

  long dim = params.feature_dim();
  for (long it = 0; it < cfg.iterations; ++it) {
    auto batch = sample_pk_batch(train_set, cfg.batch_p, cfg.batch_k,
                                 cfg.frame_number, data_rng);
    long n = static_cast<long>(batch.size());
    FrameBatch frames(n);
    std::vector<long> labels(n);
    for (long b = 0; b < n; ++b) {
      labels[b] = batch[b].label;
      const auto& seq_frames = frames_of(*batch[b].seq);
      for (long fi : batch[b].frame_idx)
        frames[b].push_back(frame_to_tensor(seq_frames[fi]));
    }

    BackboneRecord brec;
    Tensor4 in = backbone_forward(frames, params, &brec);
    HdResult hr = hd_forward(in, hd, hd_rng);

    std::vector<std::vector<double>> feats(n);
    for (long b = 0; b < n; ++b)
      feats[b].assign(hr.sum.data() + b * dim, hr.sum.data() + (b + 1) * dim);

    std::vector<double> dist = pairwise_euclidean(feats);
    TripletLossResult tl = triplet_loss_batch_all(dist, n, labels, cfg.margin);
    if (!std::isfinite(tl.loss))
      throw NumericError("train_loop: non-finite loss at iteration " +
                         std::to_string(it) + " (subjects " + batch[0].subject_id +
                         "...)");
    result.trace.push_back({it, tl.loss, tl.active_count});

    auto gfeats = pairwise_euclidean_backward(feats, dist, tl.d_dist);
    Tensor4 gsum({n, params.out_channels(), params.out_h(), 1});
    for (long b = 0; b < n; ++b)
      for (long t = 0; t < dim; ++t) gsum[b * dim + t] = gfeats[b][t];

    Tensor4 gin = hd_backward(hr.rec, gsum);
    ParamGrads pg = backbone_backward(brec, params, gin);
    adam_step(params.param_refs(), pg.refs(), opt, cfg.learning_rate);
  }
  result.checkpoint.opt = std::move(opt);
  return result;
}

void write_loss_trace(const std::vector<LossPoint>& trace,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write loss trace " + path.string());
  out << "iteration,loss,active_triplets\n";
  char buf[64];
  for (const auto& p : trace) {
    std::snprintf(buf, sizeof buf, "%ld,%.9g,%ld\n", p.iteration, p.loss,
                  p.active_triplets);
    out << buf;
  }
}

}  // namespace gait
