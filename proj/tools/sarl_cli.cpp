// Command-line harness: dataset generation, training, evaluation, attention
// export, gradient checks and dataset statistics.
#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "sarl/checkpoint.hpp"
#include "sarl/config.hpp"
#include "sarl/data.hpp"
#include "sarl/gradient_suite.hpp"
#include "sarl/metrics.hpp"
#include "sarl/trainer.hpp"

namespace fs = std::filesystem;
using namespace sarl;

namespace {

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << text;
}

void write_pgm(const fs::path& path, const std::vector<std::uint8_t>& bytes) { write_file(path.string(), bytes); }

struct TrainOptions {
  std::string data_dir;
  std::string train_file;
  std::string test_file;
  std::string config_file;
  std::string preset = "default";
  std::string out_dir = "run";
  std::map<std::string, std::string> overrides;
};

TrainConfig resolve_config(const TrainOptions& o) {
  TrainConfig cfg = preset(o.preset);
  if (!o.config_file.empty()) apply_key_values(cfg, parse_key_values([&] {
                                                 std::ifstream in(o.config_file);
                                                 if (!in) throw ConfigError("cannot open config '" + o.config_file + "'");
                                                 std::stringstream buf;
                                                 buf << in.rdbuf();
                                                 return buf.str();
                                               }()));
  for (const auto& [k, v] : o.overrides) apply_key_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

int run_train(const TrainOptions& o) {
  const TrainConfig cfg = resolve_config(o);
  const std::string train_path = !o.train_file.empty() ? o.train_file : (fs::path(o.data_dir) / "train.bin").string();
  std::string test_path = o.test_file;
  if (test_path.empty() && !o.data_dir.empty() && fs::exists(fs::path(o.data_dir) / "test.bin")) {
    test_path = (fs::path(o.data_dir) / "test.bin").string();
  }
  const Dataset train_set = load_dataset(train_path);
  std::optional<Dataset> test_set;
  if (!test_path.empty()) test_set = load_dataset(test_path);

  fs::create_directories(o.out_dir);
  std::ofstream log(fs::path(o.out_dir) / "train.log");
  std::ostringstream tee;
  TrainResult r = train(cfg, train_set, test_set ? &*test_set : nullptr, &tee);
  log << tee.str();
  std::cout << tee.str();
  save_checkpoint((fs::path(o.out_dir) / "checkpoint.bin").string(), r.checkpoint);
  if (r.test) {
    std::ofstream preds(fs::path(o.out_dir) / "predictions.txt");
    write_predictions(preds, r.test->predictions);
    write_text(fs::path(o.out_dir) / "metrics.txt", format_key_values(r.test->report));
  }
  std::cout << "checkpoint written to " << (fs::path(o.out_dir) / "checkpoint.bin").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SARL multi-label classification head: train, evaluate and inspect"};
  app.require_subcommand(1);

  // gen-data
  SyntheticConfig syn;
  std::string gen_out = "data";
  auto* gen = app.add_subcommand("gen-data", "Generate a seeded synthetic multi-label dataset");
  gen->add_option("--out", gen_out, "Output directory")->capture_default_str();
  gen->add_option("--seed", syn.seed)->capture_default_str();
  gen->add_option("--n-train", syn.n_train)->capture_default_str();
  gen->add_option("--n-test", syn.n_test)->capture_default_str();
  gen->add_option("--classes", syn.classes)->capture_default_str();
  gen->add_option("--height", syn.height)->capture_default_str();
  gen->add_option("--width", syn.width)->capture_default_str();
  gen->add_option("--channels", syn.channels)->capture_default_str();
  gen->add_option("--strength", syn.strength, "Blob amplitude")->capture_default_str();
  gen->add_option("--noise", syn.noise, "Gaussian noise std-dev")->capture_default_str();
  gen->add_option("--cardinality", syn.cardinality, "Target mean labels per sample")->capture_default_str();

  // train
  TrainOptions topt;
  auto* tr = app.add_subcommand("train", "Train the head; writes checkpoint, log, predictions and metrics");
  tr->add_option("--data", topt.data_dir, "Directory with train.bin (and test.bin)");
  tr->add_option("--train", topt.train_file, "Training split file (overrides --data)");
  tr->add_option("--test", topt.test_file, "Test split file");
  tr->add_option("--config", topt.config_file, "key=value config file");
  tr->add_option("--preset", topt.preset, "default, voc or coco")->capture_default_str();
  tr->add_option("--out", topt.out_dir, "Run directory")->capture_default_str();
  std::map<std::string, std::string> raw;
  std::map<std::string, bool> ablations;
  for (const auto& key : config_keys()) {
    if (key.starts_with("disable_")) {
      const std::string names = flag_name(key) + (key == "disable_self_attention" ? ",--disable-self-attn" : "");
      tr->add_flag(names, ablations[key], "Ablation: sets " + key + "=1");
    } else {
      tr->add_option(flag_name(key), raw[key], "Overrides config key " + key);
    }
  }
  bool no_ema = false;
  tr->add_flag("--no-ema", no_ema, "Evaluate raw weights; skip the EMA shadow");

  // eval
  std::string ckpt_path, eval_data, pred_out;
  bool eval_raw = false;
  double threshold = 0.5;
  Index top_k = 3;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  ev->add_option("--checkpoint", ckpt_path)->required();
  ev->add_option("--data", eval_data, "Dataset split file")->required();
  ev->add_option("--predictions", pred_out, "Write the prediction file here");
  ev->add_option("--threshold", threshold)->capture_default_str();
  ev->add_option("--top-k", top_k)->capture_default_str();
  ev->add_flag("--raw-weights", eval_raw, "Use training weights even if EMA weights exist");

  // export-attention
  std::string exp_ckpt, exp_data, exp_out = "attention";
  Index exp_index = 0, exp_class = 0;
  auto* ex = app.add_subcommand("export-attention", "Write class attention maps (M and B columns) as PGM");
  ex->add_option("--checkpoint", exp_ckpt)->required();
  ex->add_option("--data", exp_data, "Dataset split file")->required();
  ex->add_option("--index", exp_index, "Sample index")->capture_default_str();
  ex->add_option("--class", exp_class, "Class id")->capture_default_str();
  ex->add_option("--out", exp_out, "Output prefix; writes <prefix>_map.pgm and <prefix>_attn.pgm")->capture_default_str();

  // gradcheck
  std::uint64_t gc_seed = 0;
  auto* gc = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite; nonzero exit on failure");
  gc->add_option("--seed", gc_seed)->capture_default_str();

  // stats
  std::string st_data, st_manifest;
  auto* st = app.add_subcommand("stats", "Dataset statistics from a split file or a manifest");
  auto* st_d = st->add_option("--data", st_data, "Dataset split file");
  auto* st_m = st->add_option("--manifest", st_manifest, "Manifest file");
  st_d->excludes(st_m);

  // score
  std::string sc_pred;
  auto* sc = app.add_subcommand("score", "Re-score a prediction file");
  sc->add_option("--predictions", sc_pred)->required();
  sc->add_option("--threshold", threshold)->capture_default_str();
  sc->add_option("--top-k", top_k)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const SyntheticSplits splits = generate(syn);
      fs::create_directories(gen_out);
      save_dataset((fs::path(gen_out) / "train.bin").string(), splits.train);
      save_dataset((fs::path(gen_out) / "test.bin").string(), splits.test);
      write_text(fs::path(gen_out) / "manifest.txt",
                 manifest_text(syn, {{"train", &splits.train}, {"test", &splits.test}}));
      DatasetStats s = stats(splits.train, "train");
      s.splits.push_back(stats(splits.test, "test").splits.front());
      std::cout << format_stats(s);
      return 0;
    }
    if (tr->parsed()) {
      for (const auto& [k, v] : raw)
        if (!v.empty()) topt.overrides[k] = v;
      for (const auto& [k, on] : ablations)
        if (on) topt.overrides[k] = "1";
      if (no_ema) topt.overrides["ema"] = "0";
      if (topt.data_dir.empty() && topt.train_file.empty()) throw ConfigError("train: give --data or --train");
      return run_train(topt);
    }
    if (ev->parsed()) {
      const Checkpoint ckpt = load_checkpoint(ckpt_path);
      const Dataset data = load_dataset(eval_data);
      EvalResult r = evaluate(ckpt, data, !eval_raw);
      r.report = evaluate_predictions(r.predictions, threshold, top_k);
      if (!pred_out.empty()) {
        std::ofstream out(pred_out);
        write_predictions(out, r.predictions);
      }
      std::cout << format_table(r.report) << format_key_values(r.report);
      return 0;
    }
    if (ex->parsed()) {
      const Checkpoint ckpt = load_checkpoint(exp_ckpt);
      const Dataset data = load_dataset(exp_data);
      if (exp_index < 0 || exp_index >= data.size()) throw ConfigError("export-attention: sample index out of range");
      const AttentionMaps maps = export_attention(ckpt, data.samples[static_cast<std::size_t>(exp_index)].input, exp_class);
      write_pgm(exp_out + "_map.pgm", maps.semantic_map);
      std::cout << "wrote " << exp_out << "_map.pgm (" << maps.width << "x" << maps.height << ")\n";
      if (maps.attention) {
        write_pgm(exp_out + "_attn.pgm", *maps.attention);
        std::cout << "wrote " << exp_out << "_attn.pgm\n";
      }
      return 0;
    }
    if (gc->parsed()) {
      bool ok = true;
      for (const auto& e : run_gradient_suite(gc_seed)) {
        std::cout << (e.passed() ? "PASS " : "FAIL ") << std::left << std::setw(60) << e.name << " max_rel_err=" << std::scientific
                  << std::setprecision(3) << e.max_rel_error << " tol=" << e.tolerance << " worst=" << e.worst_input << "\n"
                  << std::defaultfloat;
        ok = ok && e.passed();
      }
      return ok ? 0 : 1;
    }
    if (st->parsed()) {
      if (st_data.empty() == st_manifest.empty()) throw ConfigError("stats: give exactly one of --data or --manifest");
      std::ifstream in(st_manifest);
      const DatasetStats s = st_data.empty() ? manifest_stats(parse_key_values(std::string(
                                                   std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>())))
                                             : stats(load_dataset(st_data), fs::path(st_data).stem().string());
      if (!st_manifest.empty() && !in) throw FormatError("cannot open manifest '" + st_manifest + "'");
      std::cout << format_stats(s);
      return 0;
    }
    if (sc->parsed()) {
      std::ifstream in(sc_pred);
      if (!in) throw FormatError("cannot open '" + sc_pred + "'");
      const MetricReport r = evaluate_predictions(read_predictions(in), threshold, top_k);
      std::cout << format_table(r) << format_key_values(r);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
