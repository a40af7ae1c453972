#include "gait/data.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "gait/backbone.hpp"

namespace gait {

namespace fs = std::filesystem;

std::string condition_name(Condition c) {
  switch (c) {
    case Condition::NM: return "nm";
    case Condition::BG: return "bg";
    default: return "cl";
  }
}

Condition parse_condition(const std::string& s) {
  if (s == "nm") return Condition::NM;
  if (s == "bg") return Condition::BG;
  if (s == "cl") return Condition::CL;
  throw DataError("unknown condition '" + s + "'");
}

const std::vector<std::pair<Condition, int>>& capture_list() {
  static const std::vector<std::pair<Condition, int>> caps = {
      {Condition::NM, 1}, {Condition::NM, 2}, {Condition::NM, 3},
      {Condition::NM, 4}, {Condition::NM, 5}, {Condition::NM, 6},
      {Condition::BG, 1}, {Condition::BG, 2},
      {Condition::CL, 1}, {Condition::CL, 2},
  };
  return caps;
}

const std::vector<int>& casia_views() {
  static const std::vector<int> v = {0, 18, 36, 54, 72, 90, 108, 126, 144, 162, 180};
  return v;
}

std::string GaitSequence::capture_name() const {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%s-%02d", condition_name(condition).c_str(), seq_index);
  return buf;
}

Image read_png_gray(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw DataError("cannot read image " + path.string());
  Image img{m.rows, m.cols, {}};
  img.px.resize(static_cast<size_t>(m.rows) * m.cols);
  for (long y = 0; y < img.h; ++y)
    for (long x = 0; x < img.w; ++x)
      img.at(y, x) = m.at<uint8_t>(static_cast<int>(y), static_cast<int>(x));
  return img;
}

void write_png_gray(const fs::path& path, const Image& img) {
  cv::Mat m(static_cast<int>(img.h), static_cast<int>(img.w), CV_8UC1);
  for (long y = 0; y < img.h; ++y)
    for (long x = 0; x < img.w; ++x)
      m.at<uint8_t>(static_cast<int>(y), static_cast<int>(x)) = img.at(y, x);
  if (!cv::imwrite(path.string(), m))
    throw DataError("cannot write image " + path.string());
}

Tensor4 frame_to_tensor(const Image& img) {
  Tensor4 t({1, 1, img.h, img.w});
  for (long i = 0; i < t.size(); ++i) t[i] = img.px[i] / 255.0;
  return t;
}

namespace {

Image resample_bilinear(const Image& src, long oh, long ow) {
  Image out{oh, ow, std::vector<uint8_t>(static_cast<size_t>(oh) * ow, 0)};
  double sy = static_cast<double>(src.h) / oh;
  double sx = static_cast<double>(src.w) / ow;
  for (long y = 0; y < oh; ++y)
    for (long x = 0; x < ow; ++x) {
      double fy = (y + 0.5) * sy - 0.5;
      double fx = (x + 0.5) * sx - 0.5;
      long y0 = static_cast<long>(std::floor(fy));
      long x0 = static_cast<long>(std::floor(fx));
      double wy = fy - y0, wx = fx - x0;
      auto px = [&](long yy, long xx) -> double {
        yy = std::clamp(yy, 0L, src.h - 1);
        xx = std::clamp(xx, 0L, src.w - 1);
        return src.at(yy, xx);
      };
      double v = (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x0 + 1)) +
                 wy * ((1 - wx) * px(y0 + 1, x0) + wx * px(y0 + 1, x0 + 1));
      out.at(y, x) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  return out;
}

}  // namespace

Image preprocess_silhouette(const Image& img) {
  long y0 = -1, y1 = -1;
  for (long y = 0; y < img.h; ++y)
    for (long x = 0; x < img.w; ++x)
      if (img.at(y, x) != 0) {
        if (y0 < 0) y0 = y;
        y1 = y;
        break;
      }
  if (y0 < 0) throw DataError("preprocess_silhouette: all-zero image");

  Image work;
  long crop_h = y1 - y0 + 1;
  if (crop_h == kFrameH) {
    work = Image{kFrameH, img.w, {}};
    work.px.assign(img.px.begin() + y0 * img.w, img.px.begin() + (y1 + 1) * img.w);
  } else {
    Image crop{crop_h, img.w, {}};
    crop.px.assign(img.px.begin() + y0 * img.w, img.px.begin() + (y1 + 1) * img.w);
    double scale = static_cast<double>(kFrameH) / crop_h;
    long nw = std::max(1L, std::lround(img.w * scale));
    work = resample_bilinear(crop, kFrameH, nw);
  }

  // integer shift putting the intensity centroid at the center column
  double mass = 0, mx = 0;
  for (long y = 0; y < work.h; ++y)
    for (long x = 0; x < work.w; ++x) {
      mass += work.at(y, x);
      mx += static_cast<double>(work.at(y, x)) * x;
    }
  long offset = std::lround(mx / mass) - kFrameW / 2;

  Image out{kFrameH, kFrameW, std::vector<uint8_t>(kFrameH * kFrameW, 0)};
  for (long y = 0; y < kFrameH; ++y)
    for (long x = 0; x < kFrameW; ++x) {
      long sx = x + offset;
      if (sx >= 0 && sx < work.w) out.at(y, x) = work.at(y, sx);
    }
  return out;
}

const std::vector<Image>& frames_of(GaitSequence& seq) {
  if (seq.frames.empty() && !seq.frame_files.empty()) {
    long rejected = 0;
    for (const auto& f : seq.frame_files) {
      try {
        seq.frames.push_back(preprocess_silhouette(read_png_gray(f)));
      } catch (const DataError&) {
        ++rejected;
      }
    }
    if (seq.frames.empty() ||
        rejected * 2 > static_cast<long>(seq.frame_files.size()))
      throw DataError("sequence " + seq.subject_id + "/" + seq.capture_name() +
                      ": " + std::to_string(rejected) + " of " +
                      std::to_string(seq.frame_files.size()) + " frames unusable");
  }
  return seq.frames;
}

DatasetIndex index_casia_b(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset root not found: " + root.string());
  static const std::regex subject_re("^[0-9]{3}$");
  static const std::regex capture_re("^(nm|bg|cl)-([0-9]{2})$");
  static const std::regex view_re("^[0-9]{3}$");

  DatasetIndex index;
  std::vector<fs::path> subjects;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) subjects.push_back(e.path());
  std::sort(subjects.begin(), subjects.end());
  if (subjects.empty()) throw DataError("dataset root is empty: " + root.string());

  for (const auto& sdir : subjects) {
    std::string sid = sdir.filename().string();
    if (!std::regex_match(sid, subject_re)) {
      index.skip_report.push_back("unparseable subject directory: " + sid);
      continue;
    }
    std::vector<GaitSequence> seqs;
    std::vector<fs::path> captures;
    for (const auto& e : fs::directory_iterator(sdir))
      if (e.is_directory()) captures.push_back(e.path());
    std::sort(captures.begin(), captures.end());
    for (const auto& cdir : captures) {
      std::smatch m;
      std::string cname = cdir.filename().string();
      if (!std::regex_match(cname, m, capture_re)) {
        index.skip_report.push_back("unparseable capture directory: " + sid + "/" + cname);
        continue;
      }
      std::vector<fs::path> views;
      for (const auto& e : fs::directory_iterator(cdir))
        if (e.is_directory()) views.push_back(e.path());
      std::sort(views.begin(), views.end());
      for (const auto& vdir : views) {
        std::string vname = vdir.filename().string();
        if (!std::regex_match(vname, view_re)) {
          index.skip_report.push_back("unparseable view directory: " + sid + "/" +
                                      cname + "/" + vname);
          continue;
        }
        GaitSequence seq;
        seq.subject_id = sid;
        seq.condition = parse_condition(m[1].str());
        seq.seq_index = std::stoi(m[2].str());
        seq.view = std::stoi(vname);
        for (const auto& e : fs::directory_iterator(vdir))
          if (e.is_regular_file() && e.path().extension() == ".png")
            seq.frame_files.push_back(e.path());
        std::sort(seq.frame_files.begin(), seq.frame_files.end());
        if (seq.frame_files.empty()) {
          index.skip_report.push_back("no usable frames: " + sid + "/" + cname + "/" + vname);
          continue;
        }
        seqs.push_back(std::move(seq));
      }
    }
    if (!seqs.empty()) {
      index.subjects.push_back(sid);
      index.sequences.emplace(sid, std::move(seqs));
    }
  }
  return index;
}

std::pair<DatasetIndex, DatasetIndex> split_lt(const DatasetIndex& index) {
  long n = index.subject_count();
  if (n < 2)
    throw DataError("split_lt: need at least 2 subjects, have " + std::to_string(n));
  long train_n = n >= 75 ? 74 : (n * 3 + 4) / 5;  // ceil(0.6 n)
  DatasetIndex train, test;
  for (long i = 0; i < n; ++i) {
    const std::string& sid = index.subjects[i];
    DatasetIndex& dst = i < train_n ? train : test;
    dst.subjects.push_back(sid);
    dst.sequences.emplace(sid, index.sequences.at(sid));
  }
  return {std::move(train), std::move(test)};
}

std::vector<long> sample_frame_indices(long len, long count, Rng& rng) {
  std::vector<long> idx;
  if (len >= count) {
    idx = rng.sample_without_replacement(len, count);
  } else {
    idx.resize(count);
    for (long i = 0; i < count; ++i) idx[i] = rng.index(len);
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

// ---------------------------------------------------------------------------
// Synthetic walker

namespace {

struct WalkerBody {
  double head_r, torso_hw, torso_hh, leg_len, leg_thick, swing, period, hip_gap;
};

uint64_t mix(uint64_t a, uint64_t b) {
  a ^= b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2);
  return a;
}

WalkerBody draw_body(Rng& rng) {
  WalkerBody b;
  b.head_r = rng.range(3.5, 6.5);
  b.torso_hw = rng.range(5.0, 11.0);
  b.torso_hh = rng.range(11.0, 16.0);
  b.leg_len = rng.range(20.0, 26.0);
  b.leg_thick = rng.range(1.5, 3.5);
  b.swing = rng.range(0.25, 0.6);
  b.period = rng.range(12.0, 20.0);
  b.hip_gap = rng.range(1.0, 3.5);
  return b;
}

double seg_dist(double px, double py, double ax, double ay, double bx, double by) {
  double vx = bx - ax, vy = by - ay;
  double t = ((px - ax) * vx + (py - ay) * vy) / (vx * vx + vy * vy);
  t = std::clamp(t, 0.0, 1.0);
  double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

Image render_walker(const WalkerBody& b, Condition cond, int view_deg, double phase) {
  const long ch = 80, cw = 60;
  double cx = cw / 2.0;
  // view mixes between a narrow frontal profile and the full lateral one
  double sview = 0.55 + 0.45 * std::sin(view_deg * M_PI / 180.0);
  double torso_hw = b.torso_hw * (cond == Condition::CL ? 1.35 : 1.0);
  double thick = b.leg_thick + (cond == Condition::CL ? 1.0 : 0.0);

  double head_cy = 4.0 + b.head_r;
  double torso_cy = head_cy + b.head_r + b.torso_hh - 1.0;
  double hip_y = torso_cy + b.torso_hh - 1.0;

  Image img{ch, cw, std::vector<uint8_t>(ch * cw, 0)};
  for (long y = 0; y < ch; ++y)
    for (long x = 0; x < cw; ++x) {
      double px = x + 0.5, py = y + 0.5;
      double dx = (px - cx) / sview;
      bool in = false;
      // head
      double hy = py - head_cy;
      if (dx * dx + hy * hy <= b.head_r * b.head_r) in = true;
      // torso ellipse
      if (!in) {
        double ty = (py - torso_cy) / b.torso_hh;
        double tx = dx / torso_hw;
        in = tx * tx + ty * ty <= 1.0;
      }
      // legs, swinging in antiphase
      for (int leg = 0; leg < 2 && !in; ++leg) {
        double ang = b.swing * std::sin(phase + leg * M_PI);
        double hx = cx + (leg == 0 ? -1 : 1) * b.hip_gap * sview;
        double fx = hx + b.leg_len * std::sin(ang) * sview;
        double fy = hip_y + b.leg_len * std::cos(ang);
        in = seg_dist(px, py, hx, hip_y, fx, fy) <= thick;
      }
      // carried bag
      if (!in && cond == Condition::BG) {
        double bx = (px - (cx + (torso_hw + 3.0) * sview)) / (4.0 * sview);
        double by = (py - (hip_y - 4.0)) / 6.0;
        in = bx * bx + by * by <= 1.0;
      }
      if (in) img.at(y, x) = 255;
    }
  return img;
}

}  // namespace

DatasetIndex synth_dataset(const SynthSpec& spec, uint64_t seed) {
  require(spec.subjects >= 2, "synth_dataset: need at least 2 subjects");
  require(spec.frames_per_seq >= 8, "synth_dataset: need at least 8 frames per sequence");
  for (int v : spec.views)
    require(v >= 0 && v <= 180 && v % 18 == 0,
            "synth_dataset: views must lie in {0,18,...,180}");
  require(!spec.views.empty(), "synth_dataset: empty view list");

  DatasetIndex index;
  for (long s = 0; s < spec.subjects; ++s) {
    char sid[8];
    std::snprintf(sid, sizeof sid, "%03ld", s + 1);
    Rng body_rng(mix(seed, static_cast<uint64_t>(s) + 1));
    WalkerBody body = draw_body(body_rng);

    std::vector<GaitSequence> seqs;
    long cap_idx = 0;
    for (const auto& [cond, ci] : capture_list()) {
      for (int view : spec.views) {
        GaitSequence seq;
        seq.subject_id = sid;
        seq.condition = cond;
        seq.seq_index = ci;
        seq.view = view;
        Rng seq_rng(mix(mix(seed, static_cast<uint64_t>(s) + 1),
                        static_cast<uint64_t>(cap_idx * 1000 + view) + 7));
        double phase = seq_rng.range(0.0, 2.0 * M_PI);
        double dphase = 2.0 * M_PI / body.period;
        for (long f = 0; f < spec.frames_per_seq; ++f) {
          seq.frames.push_back(
              preprocess_silhouette(render_walker(body, cond, view, phase)));
          phase += dphase;
        }
        seqs.push_back(std::move(seq));
      }
      ++cap_idx;
    }
    index.subjects.push_back(sid);
    index.sequences.emplace(sid, std::move(seqs));
  }
  return index;
}

void export_dataset(DatasetIndex& index, const fs::path& dir) {
  for (const std::string& sid : index.subjects)
    for (GaitSequence& seq : index.sequences.at(sid)) {
      char view[8];
      std::snprintf(view, sizeof view, "%03d", seq.view);
      fs::path vdir = dir / sid / seq.capture_name() / view;
      fs::create_directories(vdir);
      const auto& frames = frames_of(seq);
      for (size_t f = 0; f < frames.size(); ++f) {
        char name[16];
        std::snprintf(name, sizeof name, "%03zu.png", f);
        write_png_gray(vdir / name, frames[f]);
      }
    }
}

}  // namespace gait
