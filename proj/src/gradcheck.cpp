#include "gait/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gait/backbone.hpp"
#include "gait/hd.hpp"
#include "gait/ops.hpp"
#include "gait/rng.hpp"

namespace gait {

bool FdCheck::compare(const std::function<double(const Tensor4&)>& phi,
                      Tensor4 point, const Tensor4& analytic,
                      const std::vector<long>& coords) {
  std::vector<long> all;
  const std::vector<long>* cs = &coords;
  if (coords.empty()) {
    all.resize(point.size());
    for (long i = 0; i < point.size(); ++i) all[i] = i;
    cs = &all;
  }
  bool ok = true;
  for (long i : *cs) {
    double saved = point[i];
    point[i] = saved + step;
    double fp = phi(point);
    point[i] = saved - step;
    double fm = phi(point);
    point[i] = saved;
    double fd = (fp - fm) / (2.0 * step);
    double rel = std::abs(fd - analytic[i]) / std::max(1.0, std::abs(analytic[i]));
    max_rel_err = std::max(max_rel_err, rel);
    if (rel > tolerance) ok = false;
  }
  return ok;
}

namespace {

Tensor4 random_tensor(Shape4 s, Rng& rng) {
  Tensor4 t(s);
  for (long i = 0; i < t.size(); ++i) t[i] = rng.range(-1.0, 1.0);
  return t;
}

double inner(const Tensor4& a, const Tensor4& b) {
  double s = 0.0;
  for (long i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// kink guards: resample until the input is separated from ties by margin

bool relu_safe(const Tensor4& t, double margin) {
  for (long i = 0; i < t.size(); ++i)
    if (std::abs(t[i]) < margin) return false;
  return true;
}

bool window_safe(const Tensor4& t, long y0, long x0, long b, long c, double margin) {
  double v[4] = {t.at(b, c, y0, x0), t.at(b, c, y0, x0 + 1), t.at(b, c, y0 + 1, x0),
                 t.at(b, c, y0 + 1, x0 + 1)};
  std::sort(v, v + 4);
  return v[3] - v[2] >= margin;
}

bool maxpool_safe(const Tensor4& t, double margin) {
  for (long b = 0; b < t.n(); ++b)
    for (long c = 0; c < t.c(); ++c)
      for (long y = 0; y < t.h(); y += 2)
        for (long x = 0; x < t.w(); x += 2)
          if (!window_safe(t, y, x, b, c, margin)) return false;
  return true;
}

bool axis_max_safe(const Tensor4& t, int axis, double margin) {
  long dims[4] = {t.n(), t.c(), t.h(), t.w()};
  long inner_sz = 1;
  for (int i = axis + 1; i < 4; ++i) inner_sz *= dims[i];
  long len = dims[axis];
  long outer = t.size() / (inner_sz * len);
  for (long a = 0; a < outer; ++a)
    for (long i = 0; i < inner_sz; ++i) {
      double top = -1e300, second = -1e300;
      for (long j = 0; j < len; ++j) {
        double v = t[a * len * inner_sz + j * inner_sz + i];
        if (v > top) {
          second = top;
          top = v;
        } else if (v > second) {
          second = v;
        }
      }
      if (len > 1 && top - second < margin) return false;
    }
  return true;
}

struct Suite {
  double step, tol;
  long instances;
  Rng rng;
  std::vector<GradCheck> results;

  template <class MakePoint, class Check>
  void run(const std::string& name, MakePoint make_point, Check check) {
    GradCheck g{name, true, 0.0, instances};
    for (long t = 0; t < instances; ++t) {
      auto point = make_point();
      FdCheck fd{step, tol, 0.0};
      if (!check(point, fd)) g.ok = false;
      g.max_rel_err = std::max(g.max_rel_err, fd.max_rel_err);
    }
    results.push_back(g);
  }
};

}  // namespace

std::vector<GradCheck> run_gradient_suite(uint64_t seed, long instances,
                                          double step, double tol) {
  Suite s{step, tol, instances, Rng(seed), {}};
  double margin = 10.0 * step;
  Rng& rng = s.rng;

  s.run(
      "add",
      [&] { return std::pair(random_tensor({2, 2, 3, 4}, rng), random_tensor({2, 2, 3, 4}, rng)); },
      [&](auto& pt, FdCheck& fd) {
        auto& [a, b] = pt;
        Tensor4 up = random_tensor(a.shape(), rng);
        // backward of add is the identity on both inputs
        bool ok = fd.compare([&](const Tensor4& x) { return inner(add(x, b), up); }, a, up);
        ok &= fd.compare([&](const Tensor4& x) { return inner(add(a, x), up); }, b, up);
        return ok;
      });

  s.run(
      "leaky_relu",
      [&] {
        Tensor4 t;
        do {
          t = random_tensor({2, 3, 4, 5}, rng);
        } while (!relu_safe(t, margin));
        return t;
      },
      [&](Tensor4& x, FdCheck& fd) {
        Tensor4 up = random_tensor(x.shape(), rng);
        LeakyReluResult r = leaky_relu(x, 0.01);
        Tensor4 g = leaky_relu_backward(r.rec, up);
        return fd.compare(
            [&](const Tensor4& p) { return inner(leaky_relu(p, 0.01).out, up); }, x, g);
      });

  s.run(
      "maxpool2d",
      [&] {
        Tensor4 t;
        do {
          t = random_tensor({1, 2, 4, 4}, rng);
        } while (!maxpool_safe(t, margin));
        return t;
      },
      [&](Tensor4& x, FdCheck& fd) {
        MaxPoolResult r = maxpool2d(x);
        Tensor4 up = random_tensor(r.out.shape(), rng);
        Tensor4 g = maxpool2d_backward(r.rec, up);
        return fd.compare(
            [&](const Tensor4& p) { return inner(maxpool2d(p).out, up); }, x, g);
      });

  for (int axis = 0; axis < 4; ++axis) {
    s.run(
        "reduce_max axis " + std::to_string(axis),
        [&] {
          Tensor4 t;
          do {
            t = random_tensor({2, 3, 4, 5}, rng);
          } while (!axis_max_safe(t, axis, margin));
          return t;
        },
        [&](Tensor4& x, FdCheck& fd) {
          ReduceResult r = reduce_max(x, axis);
          Tensor4 up = random_tensor(r.out.shape(), rng);
          Tensor4 g = reduce_max_backward(r.rec, up);
          return fd.compare(
              [&](const Tensor4& p) { return inner(reduce_max(p, axis).out, up); }, x, g);
        });
    s.run(
        "reduce_mean axis " + std::to_string(axis),
        [&] { return random_tensor({2, 3, 4, 5}, rng); },
        [&](Tensor4& x, FdCheck& fd) {
          ReduceResult r = reduce_mean(x, axis);
          Tensor4 up = random_tensor(r.out.shape(), rng);
          Tensor4 g = reduce_mean_backward(r.rec, up);
          return fd.compare(
              [&](const Tensor4& p) { return inner(reduce_mean(p, axis).out, up); }, x, g);
        });
  }

  s.run(
      "conv2d",
      [&] {
        return std::tuple(random_tensor({2, 2, 6, 6}, rng), random_tensor({3, 2, 3, 3}, rng),
                          random_tensor({1, 1, 1, 3}, rng));
      },
      [&](auto& pt, FdCheck& fd) {
        auto& [in, ker, bias] = pt;
        for (long pad : {0L, 1L}) {
          Conv2dResult r = conv2d(in, ker, bias.values(), pad);
          Tensor4 up = random_tensor(r.out.shape(), rng);
          Conv2dGrads g = conv2d_backward(r.rec, up);
          bool ok = fd.compare(
              [&](const Tensor4& p) { return inner(conv2d(p, ker, bias.values(), pad).out, up); },
              in, g.d_input);
          ok &= fd.compare(
              [&](const Tensor4& p) { return inner(conv2d(in, p, bias.values(), pad).out, up); },
              ker, g.d_kernels);
          ok &= fd.compare(
              [&](const Tensor4& p) { return inner(conv2d(in, ker, p.values(), pad).out, up); },
              bias, Tensor4({1, 1, 1, 3}, g.d_bias));
          if (!ok) return false;
        }
        return true;
      });

  s.run(
      "hd_forward (fixed mask)",
      [&] {
        Tensor4 t;
        do {
          t = random_tensor({2, 3, 8, 5}, rng);
        } while (!axis_max_safe(t, 3, margin));
        return t;
      },
      [&](Tensor4& x, FdCheck& fd) {
        DropMask mask = fixed_mask(8, {1, 4, 6}, HdStructure::CHD);
        HdConfig cfg;
        cfg.mode = HdMode::Eval;  // reductions only; the mask is applied below
        Rng dummy(0);
        HdResult hr = hd_forward(x, cfg, dummy);
        hr.rec.masks = {mask};
        Tensor4 up = random_tensor(hr.sum.shape(), rng);
        Tensor4 g = hd_backward(hr.rec, up);
        auto phi = [&](const Tensor4& p) {
          return inner(placement_variant(p, mask, Placement::MaskSum), up);
        };
        return fd.compare(phi, x, g);
      });

  // end-to-end: tiny geometry, parameter gradients, sampled coordinates
  s.run(
      "backbone+hd end-to-end", [&] { return 0; },
      [&](int, FdCheck& fd) {
        DropMask mask = fixed_mask(8, {2, 5}, HdStructure::CHD);
        HdConfig cfg;
        cfg.mode = HdMode::Eval;
        Rng dummy(0);

        // resample the whole instance until every max tie and rectifier kink
        // is separated by at least the 10*step margin
        BackboneParams params;
        FrameBatch batch;
        BackboneRecord brec;
        Tensor4 in;
        for (int attempt = 0;; ++attempt) {
          require(attempt < 100, "gradcheck: could not find a kink-free point");
          Rng init(rng.next());
          params = init_params({2, 3}, init);
          params.in_h = 16;
          params.in_w = 12;
          batch.assign(2, {});
          for (auto& seq : batch)
            for (int f = 0; f < 3; ++f) {
              Tensor4 t({1, 1, 16, 12});
              for (long i = 0; i < t.size(); ++i) t[i] = rng.range(0.0, 1.0);
              seq.push_back(std::move(t));
            }
          brec = BackboneRecord{};
          in = backbone_forward(batch, params, &brec);
          bool safe = axis_max_safe(in, 3, margin);
          for (auto& seq : brec.frames)
            for (auto& fr : seq)
              for (auto& st : fr.stages) {
                safe = safe && relu_safe(st.relu.input, margin);
                if (st.pool) {
                  LeakyReluResult ro = leaky_relu(st.relu.input, 0.01);
                  safe = safe && maxpool_safe(ro.out, margin);
                }
              }
          // set-pool ties across frames
          for (long b = 0; b < 2 && safe; ++b) {
            std::vector<Tensor4> maps;
            for (int f = 0; f < 3; ++f) maps.push_back(encode_frame(batch[b][f], params));
            long per = maps[0].size();
            for (long j = 0; j < per && safe; ++j) {
              double top = -1e300, second = -1e300;
              for (auto& mp : maps) {
                if (mp[j] > top) {
                  second = top;
                  top = mp[j];
                } else if (mp[j] > second) {
                  second = mp[j];
                }
              }
              safe = top - second >= margin;
            }
          }
          if (safe) break;
        }

        auto forward = [&](const BackboneParams& p) {
          return placement_variant(backbone_forward(batch, p), mask, Placement::MaskSum);
        };

        HdResult hr = hd_forward(in, cfg, dummy);
        hr.rec.masks = {mask};
        Tensor4 up = random_tensor(hr.sum.shape(), rng);
        Tensor4 gin = hd_backward(hr.rec, up);
        ParamGrads pg = backbone_backward(brec, params, gin);

        bool ok = true;
        auto refs = params.param_refs();
        auto grefs = pg.refs();
        for (size_t t = 0; t < refs.size(); ++t) {
          Tensor4& target = *refs[t];
          std::vector<long> coords;
          for (long i = 0; i < std::min<long>(target.size(), 12); ++i)
            coords.push_back(rng.index(target.size()));
          std::sort(coords.begin(), coords.end());
          coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
          auto phi = [&](const Tensor4& p) {
            Tensor4 saved = target;
            target = p;
            double v = inner(forward(params), up);
            target = saved;
            return v;
          };
          ok &= fd.compare(phi, target, *grefs[t], coords);
        }
        return ok;
      });

  return s.results;
}

}  // namespace gait
