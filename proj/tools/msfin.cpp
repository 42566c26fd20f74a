// msfin: train, evaluate, ablate and inspect accident-anticipation models.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "msfin/artifacts.hpp"
#include "msfin/checkpoint.hpp"
#include "msfin/errors.hpp"
#include "msfin/feature_io.hpp"
#include "msfin/metrics.hpp"
#include "msfin/synthetic.hpp"
#include "msfin/training.hpp"

namespace fs = std::filesystem;
using namespace msfin;

namespace {

fs::path output_dir(const std::string& flag, const train::RunConfig* cfg) {
  if (!flag.empty()) return flag;
  if (cfg != nullptr) return cfg->output_dir;
  return ".";
}

void write_eval_outputs(const fs::path& dir, const std::vector<metrics::VideoPrediction>& preds,
                        const metrics::EvalOptions& options, const nlohmann::json& extra) {
  const auto report = metrics::evaluate(preds, options);
  nlohmann::json j = metrics::to_json(report);
  for (const auto& [k, v] : extra.items()) j[k] = v;
  artifacts::write_text(dir / "report.json", j.dump(2) + "\n");
  artifacts::write_text(dir / "curve.csv", metrics::curve_csv(report.curve));
  artifacts::write_text(dir / "probabilities.csv", artifacts::probabilities_csv(preds));
  std::printf("AP %.4f  AP@80R %.4f  mTTA %.3f s  TTA@80R %s  (%zu positives, %zu negatives)\n", report.ap,
              report.ap_at_80r, report.mtta_seconds,
              report.tta_at_80r_seconds ? (std::to_string(*report.tta_at_80r_seconds) + " s").c_str() : "n/a",
              report.positives, report.negatives);
}

int cmd_train(const std::string& config_path, const std::string& out_flag) {
  const auto cfg = train::load_run_config(config_path);
  const fs::path dir = output_dir(out_flag, &cfg);
  const auto data = train::load_data(cfg);
  std::printf("training on %zu records, evaluating on %zu (config %s, seed %llu)\n", data.train.size(),
              data.eval.size(), train::config_hash(cfg).c_str(), static_cast<unsigned long long>(cfg.seed));
  train::TrainOptions options;
  options.output_dir = dir;
  options.on_epoch = [](const train::EpochRow& r) {
    std::printf("epoch %3zu  loss %.5f  val AP %s  val mTTA %s  (%.1f s)\n", r.epoch, r.train_loss,
                r.val_ap ? std::to_string(*r.val_ap).c_str() : "n/a",
                r.val_mtta ? std::to_string(*r.val_mtta).c_str() : "n/a", r.seconds);
    std::fflush(stdout);
  };
  auto result = train::train(cfg, data.train, data.eval, options);
  artifacts::write_text(dir / "training_log.csv", artifacts::training_log_csv(result.log));
  if (!data.eval.empty()) {
    try {
      write_eval_outputs(dir, train::predict(result.model, data.eval), {},
                         {{"config_hash", result.log.config_hash}, {"checkpoint", (dir / "final.ckpt").string()}});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::UndefinedMetric) throw;
      std::fprintf(stderr, "warning: no evaluation report: %s\n", e.what());
    }
  }
  std::printf("artifacts in %s (best epoch %zu)\n", dir.string().c_str(), result.best_epoch);
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt, const std::string& data_path,
             const std::string& out_flag, bool frame_ap, bool zero_empty) {
  std::optional<train::RunConfig> cfg;
  if (!config_path.empty()) cfg = train::load_run_config(config_path);
  const fs::path dir = output_dir(out_flag, cfg ? &*cfg : nullptr);
  nlohmann::json meta;
  const auto net = load_checkpoint(ckpt, &meta);
  std::vector<SequenceRecord> records;
  if (!data_path.empty()) {
    records = io::read_dataset(data_path);
  } else if (cfg) {
    records = train::load_data(*cfg).eval;
  } else {
    fail(ErrorKind::Config, "eval needs --data or a config with a data block");
  }
  train::check_compatible(net.config(), records);
  metrics::EvalOptions options;
  if (frame_ap) options.granularity = metrics::ApGranularity::frame;
  if (zero_empty) options.empty_policy = metrics::EmptyThresholdPolicy::zero;
  nlohmann::json extra = {{"checkpoint", ckpt}};
  if (meta.contains("config_hash")) extra["config_hash"] = meta.at("config_hash");
  write_eval_outputs(dir, train::predict(net, records), options, extra);
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& switches, const std::string& out_flag) {
  const auto cfg = train::load_run_config(config_path);
  const auto experiments = train::parse_switch_list(switches);
  for (const auto& e : experiments) train::apply_switches(cfg.model.switches, e);  // reject before training
  const fs::path dir = output_dir(out_flag, &cfg);
  const auto data = train::load_data(cfg);
  const auto rows = train::run_ablation(cfg, experiments, data);
  const std::string table = artifacts::ablation_csv(rows);
  artifacts::write_text(dir / "ablation.csv", table);
  std::fputs(table.c_str(), stdout);
  return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& record_id, const std::string& data_path,
              const std::string& config_path, const std::string& out_flag) {
  std::optional<train::RunConfig> cfg;
  if (!config_path.empty()) cfg = train::load_run_config(config_path);
  const fs::path dir = output_dir(out_flag, cfg ? &*cfg : nullptr);
  const auto net = load_checkpoint(ckpt);
  std::optional<SequenceRecord> record;
  if (!data_path.empty()) {
    record = io::DatasetReader(data_path).read(record_id);
  } else if (cfg) {
    auto data = train::load_data(*cfg);
    for (auto* set : {&data.eval, &data.train}) {
      for (auto& r : *set) {
        if (r.id == record_id) record = r;
      }
    }
    if (!record) fail(ErrorKind::Index, "no record '" + record_id + "' in the configured data");
  } else {
    fail(ErrorKind::Config, "infer needs --data or a config with a data block");
  }
  train::check_compatible(net.config(), {*record});
  const auto series = net.forward(*record);
  artifacts::write_text(dir / (record_id + "_probs.csv"),
                        artifacts::probabilities_csv({train::to_prediction(*record, series.probs)}));
  for (const auto& a : series.attention) {
    artifacts::write_text(dir / (record_id + "_attention_" + msm::to_string(a.scale) + ".csv"),
                          artifacts::attention_csv(a));
  }
  artifacts::write_text(dir / (record_id + "_risk.svg"),
                        artifacts::probability_svg({{"p(accident)", series.probs}}, 0.5, record_id));
  double peak = 0;
  for (double p : series.probs) peak = std::max(peak, p);
  std::printf("%s: %zu frames, max z %.4f, outputs in %s\n", record_id.c_str(), series.probs.size(), peak,
              dir.string().c_str());
  return 0;
}

struct GenerateArgs {
  std::string out = "synthetic.msfd";
  std::string manifest;
  std::size_t per_archetype = 20;
  std::uint64_t seed = 0;
  std::size_t frames = 50, objects = 6, d_in = 64;
  int fps = 10;
  int t_ao = 40;
  double sigma = 1.0;
  double test_fraction = 0.2;
};

int cmd_generate(GenerateArgs a) {
  if (const char* env = std::getenv("MSFIN_SEED"); env != nullptr && *env != '\0') {
    train::RunConfig tmp;
    train::apply_env_overrides(tmp);
    a.seed = tmp.seed;
  }
  synth::ScenarioSpec base;
  base.frames = a.frames;
  base.objects = a.objects;
  base.feature_dim = a.d_in;
  base.fps = a.fps;
  base.t_ao = a.t_ao;
  base.noise_sigma = a.sigma;
  auto ds = synth::generate_dataset(a.per_archetype, base, a.seed);
  const auto split = synth::split_indices(ds.records.size(), a.test_fraction, derive_seed(a.seed, 8));
  for (auto i : split.train) ds.records[i].split = "train";
  for (auto i : split.test) ds.records[i].split = "test";
  io::write_dataset(ds.records, a.out);
  auto manifest = ds.manifest();
  nlohmann::json splits = nlohmann::json::object();
  for (const auto& r : ds.records) splits[r.id] = r.split;
  manifest["splits"] = splits;
  const std::string manifest_path = a.manifest.empty() ? a.out + ".manifest.json" : a.manifest;
  artifacts::write_text(manifest_path, manifest.dump(2) + "\n");
  std::printf("wrote %zu records to %s (manifest %s)\n", ds.records.size(), a.out.c_str(), manifest_path.c_str());
  return 0;
}

int cmd_import(const std::string& blob, const std::string& layout_name, std::size_t frames, std::size_t objects,
               std::size_t d_in, const std::string& labels, const std::string& out) {
  io::RawLayout layout = layout_name == "custom" ? io::RawLayout::custom(frames, objects, d_in)
                                                 : io::RawLayout::named(layout_name);
  const auto records = io::import_raw_tensor(blob, layout, labels);
  io::write_dataset(records, out);
  std::printf("imported %zu sequences (T=%zu, N=%zu, d_in=%zu) into %s\n", records.size(), layout.frames,
              layout.channels - 1, layout.feature_dim, out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale feature interaction network for traffic accident anticipation"};
  app.require_subcommand(1);

  std::string config, ckpt, data, out, switches, record;
  bool frame_ap = false, zero_empty = false;

  auto* train_cmd = app.add_subcommand("train", "Train a model from a JSON run config");
  train_cmd->add_option("-c,--config", config, "Run config JSON")->required();
  train_cmd->add_option("-o,--out", out, "Output directory (default: config output_dir)");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("-c,--config", config, "Run config JSON");
  eval_cmd->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", data, "MSFD dataset (default: evaluation split of the config)");
  eval_cmd->add_option("-o,--out", out, "Output directory");
  eval_cmd->add_flag("--frame-ap", frame_ap, "Frame-level instead of video-level AP");
  eval_cmd->add_flag("--zero-empty-thresholds", zero_empty, "Count thresholds with no detection as 0 s TTA");

  auto* ablate_cmd = app.add_subcommand("ablate", "Train the baseline and one run per disabled component");
  ablate_cmd->add_option("-c,--config", config, "Run config JSON")->required();
  ablate_cmd->add_option("--switches", switches, "Comma list of S,M,L,sam,cam_pre,cam_post,ctm; '+' combines")
      ->required();
  ablate_cmd->add_option("-o,--out", out, "Output directory");

  auto* infer_cmd = app.add_subcommand("infer", "Dump probabilities, attention and a plot for one record");
  infer_cmd->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  infer_cmd->add_option("--record", record, "Record id")->required();
  infer_cmd->add_option("--data", data, "MSFD dataset holding the record");
  infer_cmd->add_option("-c,--config", config, "Run config JSON (data source when --data is absent)");
  infer_cmd->add_option("-o,--out", out, "Output directory");

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic MSFD dataset and its manifest");
  gen_cmd->add_option("-o,--out", gen.out, "Output MSFD file");
  gen_cmd->add_option("--manifest", gen.manifest, "Manifest path (default: <out>.manifest.json)");
  gen_cmd->add_option("-n,--per-archetype", gen.per_archetype, "Positives per archetype");
  gen_cmd->add_option("--seed", gen.seed, "Master seed");
  gen_cmd->add_option("--frames", gen.frames, "T");
  gen_cmd->add_option("--objects", gen.objects, "N");
  gen_cmd->add_option("--d-in", gen.d_in, "Feature width");
  gen_cmd->add_option("--fps", gen.fps, "Frames per second");
  gen_cmd->add_option("--t-ao", gen.t_ao, "Accident frame of positives");
  gen_cmd->add_option("--sigma", gen.sigma, "Noise standard deviation");
  gen_cmd->add_option("--test-fraction", gen.test_fraction, "Share of records tagged test");

  std::string blob, layout = "dad", labels, import_out;
  std::size_t imp_frames = 0, imp_objects = 0, imp_d = 0;
  auto* import_cmd = app.add_subcommand("import", "Convert a raw float32 feature blob into MSFD");
  import_cmd->add_option("--blob", blob, "Raw little-endian f32 blob")->required();
  import_cmd->add_option("--layout", layout, "dad | dada | custom");
  import_cmd->add_option("--frames", imp_frames, "T (custom layout)");
  import_cmd->add_option("--objects", imp_objects, "N (custom layout)");
  import_cmd->add_option("--d-in", imp_d, "Feature width (custom layout)");
  import_cmd->add_option("--labels", labels, "JSONL labels sidecar")->required();
  import_cmd->add_option("-o,--out", import_out, "Output MSFD file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train_cmd) return cmd_train(config, out);
    if (*eval_cmd) return cmd_eval(config, ckpt, data, out, frame_ap, zero_empty);
    if (*ablate_cmd) return cmd_ablate(config, switches, out);
    if (*infer_cmd) return cmd_infer(ckpt, record, data, config, out);
    if (*gen_cmd) return cmd_generate(gen);
    if (*import_cmd) return cmd_import(blob, layout, imp_frames, imp_objects, imp_d, labels, import_out);
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(to_string(e.kind())).c_str(), e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
