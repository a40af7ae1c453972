#include "gait/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace gait {

namespace {

using nlohmann::json;

void write_doubles(std::ofstream& out, const Tensor4& t) {
  for (long i = 0; i < t.size(); ++i) {
    uint64_t bits;
    double v = t[i];
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
    out.write(reinterpret_cast<const char*>(b), 8);
  }
}

Tensor4 read_doubles(std::ifstream& in, const Shape4& s, uint64_t offset) {
  in.seekg(static_cast<std::streamoff>(offset));
  Tensor4 t(s);
  std::vector<unsigned char> buf(static_cast<size_t>(t.size()) * 8);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw DataError("checkpoint: truncated params.bin");
  for (long i = 0; i < t.size(); ++i) {
    uint64_t bits = 0;
    for (int k = 0; k < 8; ++k)
      bits |= static_cast<uint64_t>(buf[i * 8 + k]) << (8 * k);
    double v;
    std::memcpy(&v, &bits, 8);
    t[i] = v;
  }
  return t;
}

json shape_json(const Shape4& s) { return json::array({s.n, s.c, s.h, s.w}); }

Shape4 shape_from(const json& j) {
  return Shape4{j.at(0).get<long>(), j.at(1).get<long>(), j.at(2).get<long>(),
                j.at(3).get<long>()};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
  std::filesystem::create_directories(dir);

  std::vector<std::pair<std::string, const Tensor4*>> entries;
  auto names = ckpt.params.param_names();
  auto refs = ckpt.params.param_refs();
  for (size_t i = 0; i < refs.size(); ++i) entries.emplace_back(names[i], refs[i]);
  if (ckpt.opt) {
    for (size_t i = 0; i < ckpt.opt->m.size(); ++i) {
      entries.emplace_back("adam.m." + names[i], &ckpt.opt->m[i]);
      entries.emplace_back("adam.v." + names[i], &ckpt.opt->v[i]);
    }
  }

  json manifest;
  manifest["format"] = 1;
  json backbone;
  backbone["in_h"] = ckpt.params.in_h;
  backbone["in_w"] = ckpt.params.in_w;
  json stages = json::array();
  for (const auto& st : ckpt.params.stages)
    stages.push_back({{"pool", st.pool}, {"kernel", st.kernels.h()}});
  backbone["stages"] = stages;
  manifest["backbone"] = backbone;
  if (ckpt.opt) {
    manifest["optimizer"] = {{"type", "adam"},
                             {"step", ckpt.opt->step},
                             {"beta1", ckpt.opt->beta1},
                             {"beta2", ckpt.opt->beta2},
                             {"epsilon", ckpt.opt->epsilon}};
  }

  std::ofstream bin(dir / "params.bin", std::ios::binary | std::ios::trunc);
  if (!bin) throw DataError("checkpoint: cannot write " + (dir / "params.bin").string());
  json tensors = json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : entries) {
    tensors.push_back({{"name", name}, {"shape", shape_json(t->shape())}, {"offset", offset}});
    write_doubles(bin, *t);
    offset += static_cast<uint64_t>(t->size()) * 8;
  }
  manifest["tensors"] = tensors;
  bin.close();

  std::ofstream mf(dir / "manifest.json", std::ios::trunc);
  if (!mf) throw DataError("checkpoint: cannot write manifest.json");
  mf << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw DataError("checkpoint: missing " + (dir / "manifest.json").string());
  json manifest = json::parse(mf);
  std::ifstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw DataError("checkpoint: missing params.bin");

  std::map<std::string, Tensor4> tensors;
  for (const auto& e : manifest.at("tensors"))
    tensors.emplace(e.at("name").get<std::string>(),
                    read_doubles(bin, shape_from(e.at("shape")), e.at("offset").get<uint64_t>()));

  Checkpoint ckpt;
  const json& bb = manifest.at("backbone");
  ckpt.params.in_h = bb.at("in_h").get<long>();
  ckpt.params.in_w = bb.at("in_w").get<long>();
  size_t nstages = bb.at("stages").size();
  for (size_t i = 0; i < nstages; ++i) {
    ConvStage st;
    st.pool = bb.at("stages").at(i).at("pool").get<bool>();
    st.kernels = tensors.at("stage" + std::to_string(i) + ".kernels");
    st.bias = tensors.at("stage" + std::to_string(i) + ".bias");
    ckpt.params.stages.push_back(std::move(st));
  }

  if (manifest.contains("optimizer")) {
    AdamState opt;
    const json& o = manifest.at("optimizer");
    opt.step = o.at("step").get<long>();
    opt.beta1 = o.at("beta1").get<double>();
    opt.beta2 = o.at("beta2").get<double>();
    opt.epsilon = o.at("epsilon").get<double>();
    for (const std::string& name : ckpt.params.param_names()) {
      opt.m.push_back(tensors.at("adam.m." + name));
      opt.v.push_back(tensors.at("adam.v." + name));
    }
    ckpt.opt = std::move(opt);
  }
  return ckpt;
}

}  // namespace gait
