// gaitchd: synthesize data, train, evaluate, sweep drop numbers, and run the
// gradient verification suite for horizontal-dropout gait features.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <atomic>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "gait/checkpoint.hpp"
#include "gait/data.hpp"
#include "gait/eval.hpp"
#include "gait/gradcheck.hpp"
#include "gait/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gait;

namespace {

long env_threads() {
  const char* v = std::getenv("GAITCHD_THREADS");
  long n = v ? std::atol(v) : static_cast<long>(std::thread::hardware_concurrency());
  return std::max(1L, n);
}

std::vector<int> parse_views(const std::string& s) {
  std::vector<int> views;
  size_t pos = 0;
  while (pos < s.size()) {
    size_t next = s.find_first_of(",:", pos);
    std::string tok = s.substr(pos, next == std::string::npos ? next : next - pos);
    views.push_back(std::stoi(tok));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return views;
}

struct DataSource {
  std::string data_dir;
  std::string synth_spec;

  void add_options(CLI::App* cmd) {
    auto* d = cmd->add_option("--data", data_dir, "dataset root in the CASIA-B layout");
    auto* s = cmd->add_option("--synth", synth_spec,
                              "in-memory synthetic spec, e.g. "
                              "subjects=20,frames=16,seed=7,views=0:36:72:108:144");
    d->excludes(s);
  }

  DatasetIndex load() const {
    if (!data_dir.empty()) return index_casia_b(data_dir);
    if (synth_spec.empty())
      throw UsageError("exactly one of --data or --synth is required");
    SynthSpec spec;
    uint64_t seed = 0;
    size_t pos = 0;
    while (pos < synth_spec.size()) {
      size_t next = synth_spec.find(',', pos);
      std::string tok = synth_spec.substr(
          pos, next == std::string::npos ? next : next - pos);
      size_t eq = tok.find('=');
      if (eq == std::string::npos) throw UsageError("bad --synth token '" + tok + "'");
      std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "subjects") spec.subjects = std::stol(val);
      else if (key == "frames") spec.frames_per_seq = std::stol(val);
      else if (key == "seed") seed = std::stoull(val);
      else if (key == "views") spec.views = parse_views(val);
      else throw UsageError("unknown --synth key '" + key + "'");
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    return synth_dataset(spec, seed);
  }

  json describe() const {
    if (!data_dir.empty()) return {{"data", data_dir}};
    return {{"synth", synth_spec}};
  }
};

HdStructure parse_structure(const std::string& s) {
  if (s == "CHD" || s == "chd") return HdStructure::CHD;
  if (s == "SHD" || s == "shd") return HdStructure::SHD;
  throw UsageError("hd structure must be CHD or SHD, got '" + s + "'");
}

TrainConfig load_config(const std::string& path) {
  TrainConfig cfg;
  cfg.widths = {8, 16, 32};
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path);
  json j = json::parse(in);
  for (auto& [key, val] : j.items()) {
    if (key == "learning_rate") cfg.learning_rate = val.get<double>();
    else if (key == "margin") cfg.margin = val.get<double>();
    else if (key == "batch_p") cfg.batch_p = val.get<long>();
    else if (key == "batch_k") cfg.batch_k = val.get<long>();
    else if (key == "frame_number") cfg.frame_number = val.get<long>();
    else if (key == "iterations") cfg.iterations = val.get<long>();
    else if (key == "seed") cfg.seed = val.get<uint64_t>();
    else if (key == "widths") cfg.widths = val.get<std::vector<long>>();
    else if (key == "hd") {
      for (auto& [hk, hv] : val.items()) {
        if (hk == "structure") cfg.hd.structure = parse_structure(hv.get<std::string>());
        else if (hk == "drop_number") cfg.hd.drop_number = hv.get<long>();
        else if (hk == "mask_scope") {
          std::string s = hv.get<std::string>();
          if (s == "per-sample") cfg.hd.scope = MaskScope::PerSample;
          else if (s == "per-batch") cfg.hd.scope = MaskScope::PerBatch;
          else throw UsageError("unknown mask_scope '" + s + "'");
        } else if (hk == "rescale") cfg.hd.rescale = hv.get<bool>();
        else if (hk == "enabled") cfg.hd.enabled = hv.get<bool>();
        else throw UsageError("unknown config key 'hd." + hk + "'");
      }
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

json config_json(const TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate},
          {"margin", cfg.margin},
          {"batch_p", cfg.batch_p},
          {"batch_k", cfg.batch_k},
          {"frame_number", cfg.frame_number},
          {"iterations", cfg.iterations},
          {"seed", cfg.seed},
          {"widths", cfg.widths},
          {"hd",
           {{"structure", cfg.hd.structure == HdStructure::CHD ? "CHD" : "SHD"},
            {"drop_number", cfg.hd.drop_number},
            {"mask_scope",
             cfg.hd.scope == MaskScope::PerSample ? "per-sample" : "per-batch"},
            {"rescale", cfg.hd.rescale},
            {"enabled", cfg.hd.enabled}}}};
}

void write_manifest(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << j.dump(2) << "\n";
}

void preload(DatasetIndex& set) {
  for (const auto& sid : set.subjects)
    for (auto& seq : set.sequences.at(sid)) frames_of(seq);
}

int run(int argc, char** argv) {
  CLI::App app{"Horizontal-dropout gait feature laboratory"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "export a synthetic dataset");
  std::string synth_out, synth_views = "0,36,72,108,144";
  long synth_subjects = 20, synth_frames = 16;
  uint64_t synth_seed = 7;
  bool force = false;
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--subjects", synth_subjects);
  synth->add_option("--views", synth_views);
  synth->add_option("--frames", synth_frames);
  synth->add_option("--seed", synth_seed);
  synth->add_flag("--force", force, "overwrite a non-empty output directory");

  // train
  auto* train = app.add_subcommand("train", "train a checkpoint");
  std::string train_config, train_out;
  DataSource train_src;
  bool no_split = false;
  train->add_option("--config", train_config);
  train->add_option("--out", train_out)->required();
  train->add_flag("--no-split", no_split, "train on the full set (skip the LT split)");
  train_src.add_options(train);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_protocol, eval_out, eval_matrix;
  bool include_nm04 = false;
  DataSource eval_src;
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--protocol", eval_protocol, "cross-view | reid")->required();
  eval->add_option("--out", eval_out)->required();
  eval->add_option("--matrix", eval_matrix, "also write per-view cells");
  eval->add_flag("--include-nm04", include_nm04,
                 "use the paper's literal probe list (nm-04 in the probes)");
  eval_src.add_options(eval);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "train+evaluate over drop numbers");
  std::string sweep_config, sweep_protocol, sweep_out;
  std::vector<long> drop_numbers = {0, 1, 2, 4, 8, 13, 16, 27, 31};
  bool parallel = false;
  DataSource sweep_src;
  sweep_cmd->add_option("--config", sweep_config);
  sweep_cmd->add_option("--protocol", sweep_protocol, "cross-view | reid")->required();
  sweep_cmd->add_option("--out", sweep_out)->required();
  sweep_cmd->add_option("--drop-numbers", drop_numbers)->delimiter(',');
  sweep_cmd->add_flag("--parallel", parallel,
                      "run points concurrently with seeds seed+drop_number");
  sweep_src.add_options(sweep_cmd);

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "run the gradient verification suite");
  uint64_t gc_seed = 1;
  long gc_instances = 20;
  gc->add_option("--seed", gc_seed);
  gc->add_option("--instances", gc_instances);

  CLI11_PARSE(app, argc, argv);

  if (*synth) {
    if (synth_subjects < 2) throw UsageError("synth: --subjects must be >= 2");
    fs::path out(synth_out);
    if (fs::exists(out) && !fs::is_empty(out) && !force)
      throw UsageError("synth: " + synth_out + " is not empty (use --force)");
    SynthSpec spec{synth_subjects, parse_views(synth_views), synth_frames};
    DatasetIndex index = synth_dataset(spec, synth_seed);
    export_dataset(index, out);
    write_manifest(out / "manifest.json",
                   {{"command", "synth"},
                    {"subjects", synth_subjects},
                    {"views", spec.views},
                    {"frames", synth_frames},
                    {"seed", synth_seed}});
    std::cout << "wrote " << synth_subjects << " subjects to " << synth_out << "\n";
    return 0;
  }

  if (*train) {
    TrainConfig cfg = load_config(train_config);
    DatasetIndex full = train_src.load();
    DatasetIndex train_set = full;
    if (!no_split) train_set = split_lt(full).first;
    TrainResult result = train_loop(cfg, train_set);
    fs::path out(train_out);
    fs::create_directories(out);
    save_checkpoint(out / "checkpoint", result.checkpoint);
    write_loss_trace(result.trace, out / "loss.csv");
    write_manifest(out / "run_manifest.json",
                   {{"command", "train"},
                    {"config", config_json(cfg)},
                    {"source", train_src.describe()},
                    {"split", no_split ? "none" : "lt"}});
    if (!result.trace.empty())
      std::cout << "final loss " << result.trace.back().loss << " after "
                << cfg.iterations << " iterations\n";
    return 0;
  }

  if (*eval) {
    Checkpoint ckpt = load_checkpoint(eval_ckpt);
    DatasetIndex full = eval_src.load();
    DatasetIndex test_set = split_lt(full).second;
    FeatureTable feats = extract_features(ckpt.params, test_set);
    EvalReport rep;
    if (eval_protocol == "cross-view") rep = rank1_cross_view(feats, include_nm04);
    else if (eval_protocol == "reid") rep = rank1_reid(feats, include_nm04);
    else throw UsageError("eval: protocol must be cross-view or reid");
    write_eval_csv(rep, eval_out);
    if (!eval_matrix.empty()) write_matrix_csv(rep, eval_matrix);
    write_manifest(fs::path(eval_out).replace_extension(".manifest.json"),
                   {{"command", "eval"},
                    {"checkpoint", eval_ckpt},
                    {"protocol", eval_protocol},
                    {"include_nm04", include_nm04},
                    {"source", eval_src.describe()},
                    {"degenerate", rep.degenerate},
                    {"warnings", rep.warnings}});
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "NM " << rep.condition_acc[0] << " BG " << rep.condition_acc[1]
              << " CL " << rep.condition_acc[2] << " Average " << rep.average << "\n";
    return 0;
  }

  if (*sweep_cmd) {
    TrainConfig cfg = load_config(sweep_config);
    DatasetIndex full = sweep_src.load();
    auto [train_set, test_set] = split_lt(full);
    std::vector<SweepRow> rows;
    if (!parallel) {
      rows = sweep(drop_numbers, cfg, train_set, test_set, sweep_protocol, sweep_out);
    } else {
      preload(train_set);
      preload(test_set);
      rows.resize(drop_numbers.size());
      long workers = std::min<long>(env_threads(), static_cast<long>(drop_numbers.size()));
      std::vector<std::thread> pool;
      std::atomic<size_t> cursor{0};
      for (long t = 0; t < workers; ++t)
        pool.emplace_back([&] {
          for (size_t i; (i = cursor.fetch_add(1)) < drop_numbers.size();) {
            TrainConfig point = cfg;
            point.seed = cfg.seed + static_cast<uint64_t>(drop_numbers[i]);
            DatasetIndex local_train = train_set;  // frames already loaded
            DatasetIndex local_test = test_set;
            auto r = sweep({drop_numbers[i]}, point, local_train, local_test,
                           sweep_protocol);
            rows[i] = r[0];
          }
        });
      for (auto& th : pool) th.join();
      write_report(rows, sweep_out);
    }
    write_manifest(fs::path(sweep_out).replace_extension(".manifest.json"),
                   {{"command", "sweep"},
                    {"config", config_json(cfg)},
                    {"protocol", sweep_protocol},
                    {"drop_numbers", drop_numbers},
                    {"parallel", parallel},
                    {"source", sweep_src.describe()}});
    std::cout << "wrote " << rows.size() << " rows to " << sweep_out << "\n";
    return 0;
  }

  if (*gc) {
    auto results = run_gradient_suite(gc_seed, gc_instances);
    bool all_ok = true;
    double worst = 0.0;
    for (const auto& r : results) {
      std::cout << (r.ok ? "pass  " : "FAIL  ") << r.name << "  max_rel_err "
                << r.max_rel_err << "\n";
      all_ok &= r.ok;
      worst = std::max(worst, r.max_rel_err);
    }
    std::cout << "suite max relative error " << worst << "\n";
    if (!all_ok) throw NumericError("gradient suite failed");
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
