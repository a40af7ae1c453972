#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "doctest.h"
#include "gait/rng.hpp"
#include "gait/training.hpp"

using namespace gait;

namespace {

DatasetIndex small_synth(long subjects = 6, uint64_t seed = 7) {
  SynthSpec spec;
  spec.subjects = subjects;
  spec.views = {0, 90};
  spec.frames_per_seq = 8;
  return synth_dataset(spec, seed);
}

}  // namespace

TEST_CASE("sample_pk_batch: label structure and frame rules") {
  DatasetIndex d = small_synth();
  Rng rng(1);
  auto batch = sample_pk_batch(d, 2, 2, 4, rng);
  REQUIRE(batch.size() == 4);
  std::map<long, long> counts;
  for (const auto& it : batch) ++counts[it.label];
  REQUIRE(counts.size() == 2);
  CHECK(counts[0] == 2);
  CHECK(counts[1] == 2);
  for (const auto& it : batch) {
    // 8-frame sequences, 4 requested -> distinct increasing indices
    REQUIRE(it.frame_idx.size() == 4);
    for (size_t i = 1; i < it.frame_idx.size(); ++i)
      CHECK(it.frame_idx[i] > it.frame_idx[i - 1]);
  }

  // same seed twice -> identical composition
  Rng ra(5), rb(5);
  auto a = sample_pk_batch(d, 3, 2, 4, ra);
  auto b = sample_pk_batch(d, 3, 2, 4, rb);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].subject_id == b[i].subject_id);
    CHECK(a[i].seq == b[i].seq);
    CHECK(a[i].frame_idx == b[i].frame_idx);
  }
}

TEST_CASE("pairwise_euclidean: 3-4-5, zero diagonal, exact symmetry") {
  std::vector<std::vector<double>> feats = {{0.0, 0.0}, {3.0, 4.0}, {3.0, 4.0}};
  auto dist = pairwise_euclidean(feats);
  CHECK(dist[0 * 3 + 1] == 5.0);
  CHECK(dist[1 * 3 + 2] == 0.0);  // identical rows
  for (long i = 0; i < 3; ++i) {
    CHECK(dist[i * 3 + i] == 0.0);
    for (long j = 0; j < 3; ++j) CHECK(dist[i * 3 + j] == dist[j * 3 + i]);
  }
}

TEST_CASE("triplet loss: separated clusters give zero loss, zero actives") {
  // two clusters, intra-distance 0, inter-distance 1, margin 0.2
  std::vector<std::vector<double>> feats = {{0.0}, {0.0}, {1.0}, {1.0}};
  std::vector<long> labels = {0, 0, 1, 1};
  auto dist = pairwise_euclidean(feats);
  auto r = triplet_loss_batch_all(dist, 4, labels, 0.2);
  CHECK(r.loss == 0.0);
  CHECK(r.active_count == 0);
  for (double g : r.d_dist) CHECK(g == 0.0);
}

TEST_CASE("triplet loss: single violating triplet evaluates the hinge to 0.7") {
  // d_ap = 1, d_an = 0.5: margin 0.2 + 1 - 0.5 = 0.7
  std::vector<double> dist = {0.0, 1.0, 0.5,   //
                              1.0, 0.0, 1.5,   //
                              0.5, 1.5, 0.0};
  std::vector<long> labels = {0, 0, 1};
  auto r = triplet_loss_batch_all(dist, 3, labels, 0.2);
  // anchors 0 and 1 each have one (p, q) pair; only anchor 0 violates
  CHECK(r.active_count == 1);
  CHECK(r.loss == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("triplet loss: equals brute force over all 8 triplets of a 2x2 batch") {
  Rng rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::vector<double>> feats(4, std::vector<double>(3));
    for (auto& f : feats)
      for (auto& x : f) x = rng.range(-1, 1);
    std::vector<long> labels = {0, 0, 1, 1};
    auto dist = pairwise_euclidean(feats);
    auto r = triplet_loss_batch_all(dist, 4, labels, 0.2);

    double total = 0.0;
    long active = 0;
    for (long a = 0; a < 4; ++a)
      for (long p = 0; p < 4; ++p)
        for (long q = 0; q < 4; ++q) {
          if (p == a || labels[p] != labels[a] || labels[q] == labels[a]) continue;
          double term = 0.2 + dist[a * 4 + p] - dist[a * 4 + q];
          if (term > 0) {
            total += term;
            ++active;
          }
        }
    CHECK(active == r.active_count);
    if (active > 0)
      CHECK(r.loss == doctest::Approx(total / active).epsilon(1e-12));
    else
      CHECK(r.loss == 0.0);
  }
}

TEST_CASE("triplet loss: nonnegative and invariant under relabeling") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::vector<double>> feats(6, std::vector<double>(4));
    for (auto& f : feats)
      for (auto& x : f) x = rng.range(-1, 1);
    std::vector<long> labels = {0, 0, 1, 1, 2, 2};
    std::vector<long> renamed = {5, 5, 3, 3, 9, 9};  // bijective renaming
    auto dist = pairwise_euclidean(feats);
    auto a = triplet_loss_batch_all(dist, 6, labels, 0.2);
    auto b = triplet_loss_batch_all(dist, 6, renamed, 0.2);
    CHECK(a.loss >= 0.0);
    CHECK(a.loss == b.loss);
    CHECK(a.active_count == b.active_count);
  }
}

TEST_CASE("triplet loss: rejects batches without a valid triplet") {
  std::vector<double> d4 = {0, 1, 1, 0};
  CHECK_THROWS_AS(triplet_loss_batch_all(d4, 2, {0, 1}, 0.2), ShapeError);  // no positive
  CHECK_THROWS_AS(triplet_loss_batch_all(d4, 2, {0, 0}, 0.2), ShapeError);  // no negative
}

TEST_CASE("adam: zero gradient is a fixed point for the parameters") {
  Tensor4 p({1, 1, 1, 3}, {1.0, -2.0, 0.5});
  Tensor4 g({1, 1, 1, 3}, 0.0);
  AdamState st = AdamState::init({&p});
  Tensor4 orig = p;
  for (int i = 0; i < 5; ++i) adam_step({&p}, {&g}, st, 0.01);
  for (long i = 0; i < p.size(); ++i) CHECK(p[i] == orig[i]);
  CHECK(st.step == 5);
}

TEST_CASE("adam: first-step magnitude is about lr in the gradient direction") {
  for (double g0 : {3.0, -0.25, 1e-4}) {
    Tensor4 p({1, 1, 1, 1}, {1.0});
    Tensor4 g({1, 1, 1, 1}, {g0});
    AdamState st = AdamState::init({&p});
    adam_step({&p}, {&g}, st, 0.001);
    double delta = p[0] - 1.0;
    // bias-corrected ratio mhat/sqrt(vhat) ~= sign(g): |delta| ~= lr
    CHECK(std::abs(delta) == doctest::Approx(0.001).epsilon(1e-3));
    CHECK(delta * g0 < 0.0);  // moves against the gradient
  }
}

TEST_CASE("adam: converges on the scalar convex objective x^2") {
  Tensor4 p({1, 1, 1, 1}, {1.0});
  AdamState st = AdamState::init({&p});
  for (int i = 0; i < 200; ++i) {
    Tensor4 g({1, 1, 1, 1}, {2.0 * p[0]});
    adam_step({&p}, {&g}, st, 0.1);
  }
  CHECK(std::abs(p[0]) < 0.05);
}

TEST_CASE("adam: rejects non-finite gradients") {
  Tensor4 p({1, 1, 1, 1}, {1.0});
  Tensor4 g({1, 1, 1, 1}, {std::nan("")});
  AdamState st = AdamState::init({&p});
  CHECK_THROWS_AS(adam_step({&p}, {&g}, st, 0.001), NumericError);
}

TEST_CASE("pairwise_euclidean_backward: zero subgradient at coincident points") {
  std::vector<std::vector<double>> feats = {{1.0, 2.0}, {1.0, 2.0}};
  auto dist = pairwise_euclidean(feats);
  std::vector<double> d_dist = {0.0, 1.0, 1.0, 0.0};
  auto g = pairwise_euclidean_backward(feats, dist, d_dist);
  for (const auto& row : g)
    for (double v : row) CHECK(v == 0.0);
}

TEST_CASE("train_loop: iterations=0 returns the initialization unchanged") {
  DatasetIndex d = small_synth(4);
  TrainConfig cfg;
  cfg.batch_p = 2;
  cfg.batch_k = 2;
  cfg.frame_number = 4;
  cfg.iterations = 0;
  cfg.seed = 11;
  cfg.widths = {2, 3};
  TrainResult r = train_loop(cfg, d);
  CHECK(r.trace.empty());
  Rng init_rng(cfg.seed ^ 0x5eedbeefULL);
  BackboneParams fresh = init_params(cfg.widths, init_rng);
  REQUIRE(fresh.stages.size() == r.checkpoint.params.stages.size());
  for (size_t s = 0; s < fresh.stages.size(); ++s)
    for (long i = 0; i < fresh.stages[s].kernels.size(); ++i)
      CHECK(fresh.stages[s].kernels[i] == r.checkpoint.params.stages[s].kernels[i]);
}

TEST_CASE("train_loop: same seed and config give identical loss traces") {
  DatasetIndex d1 = small_synth(4);
  DatasetIndex d2 = small_synth(4);
  TrainConfig cfg;
  cfg.batch_p = 2;
  cfg.batch_k = 2;
  cfg.frame_number = 4;
  cfg.iterations = 5;
  cfg.seed = 13;
  cfg.widths = {2, 3};
  cfg.hd.drop_number = 4;
  TrainResult a = train_loop(cfg, d1);
  TrainResult b = train_loop(cfg, d2);
  REQUIRE(a.trace.size() == b.trace.size());
  for (size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].loss == b.trace[i].loss);
    CHECK(a.trace[i].active_triplets == b.trace[i].active_triplets);
  }
}

TEST_CASE("train_loop: d=0 trace is bit-identical with the mask stage removed") {
  DatasetIndex d1 = small_synth(4);
  DatasetIndex d2 = small_synth(4);
  TrainConfig cfg;
  cfg.batch_p = 2;
  cfg.batch_k = 2;
  cfg.frame_number = 4;
  cfg.iterations = 5;
  cfg.seed = 17;
  cfg.widths = {2, 3};
  cfg.hd.drop_number = 0;
  TrainConfig off = cfg;
  off.hd.enabled = false;  // the no-HD build
  TrainResult a = train_loop(cfg, d1);
  TrainResult b = train_loop(off, d2);
  for (size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].loss == b.trace[i].loss);
  for (size_t s = 0; s < a.checkpoint.params.stages.size(); ++s)
    for (long i = 0; i < a.checkpoint.params.stages[s].kernels.size(); ++i)
      CHECK(a.checkpoint.params.stages[s].kernels[i] ==
            b.checkpoint.params.stages[s].kernels[i]);
}

TEST_CASE("train_loop: desk-scale loss decreases over 300 iterations") {
  // 8-identity corpus; the first/last 50-iteration mean loss must fall
  SynthSpec spec;
  spec.subjects = 8;
  spec.views = {0, 90};
  spec.frames_per_seq = 8;
  DatasetIndex d = synth_dataset(spec, 7);
  TrainConfig cfg;
  cfg.batch_p = 4;
  cfg.batch_k = 2;
  cfg.frame_number = 6;
  cfg.iterations = 300;
  cfg.seed = 1;
  cfg.widths = {2, 4};
  TrainResult r = train_loop(cfg, d);
  REQUIRE(r.trace.size() == 300);
  double first = 0, last = 0;
  for (int i = 0; i < 50; ++i) {
    first += r.trace[i].loss;
    last += r.trace[300 - 50 + i].loss;
  }
  CHECK(last / 50 < first / 50);
}

TEST_CASE("config validation rejects out-of-range values") {
  TrainConfig cfg;
  cfg.iterations = 1;
  cfg.hd.drop_number = 33;
  CHECK_THROWS_AS(cfg.validate(), ShapeError);
  cfg.hd.drop_number = 0;
  cfg.batch_p = 1;
  CHECK_THROWS_AS(cfg.validate(), ShapeError);
  cfg.batch_p = 2;
  cfg.margin = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ShapeError);
}
