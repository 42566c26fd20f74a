#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "msfin/losses.hpp"
#include "msfin/metrics.hpp"
#include "msfin/model.hpp"
#include "msfin/optimizer.hpp"
#include "msfin/record.hpp"
#include "msfin/synthetic.hpp"

namespace msfin::train {

/// Where training data comes from: MSFD files, or a synthetic pool generated
/// in memory. Without an explicit test file, records tagged "test" form the
/// evaluation set; failing that, a seeded split holds out `val_fraction`.
struct DataConfig {
  std::string train_path;
  std::string test_path;
  std::optional<std::size_t> synthetic_per_archetype;
  synth::ScenarioSpec synthetic_base;
  double val_fraction = 0.2;
};

struct RunConfig {
  model::MsFINConfig model;
  loss::LossConfig loss;
  optim::AdamWConfig optimizer;
  std::size_t batch_size = 10;
  std::size_t epochs = 60;
  std::uint64_t seed = 0;
  DataConfig data;
  std::string output_dir = "runs/default";
  bool save_epoch_checkpoints = true;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Strict parse: unknown keys are config errors. loss.fps defaults to model.fps.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Reads JSON from disk, then applies MSFIN_SEED when set.
RunConfig load_run_config(const std::filesystem::path& path);
/// MSFIN_SEED override; a malformed value is a config error.
void apply_env_overrides(RunConfig& c);

/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const RunConfig& c);

struct DataBundle {
  std::vector<SequenceRecord> train;
  std::vector<SequenceRecord> eval;
};

/// Loads or generates data and checks every record against the model shape.
DataBundle load_data(const RunConfig& c);
/// Throws ShapeInconsistency when a record does not fit the model.
void check_compatible(const model::MsFINConfig& cfg, const std::vector<SequenceRecord>& records);

struct EpochRow {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;  // mean per-video loss over the epoch
  std::optional<double> val_ap;
  std::optional<double> val_mtta;
  double seconds = 0;
};

struct TrainingLog {
  std::vector<EpochRow> rows;
  std::uint64_t seed = 0;
  std::string config_hash;
  double wall_seconds = 0;

  nlohmann::json to_json() const;
};

struct TrainOptions {
  /// Artifacts go here when set: per-epoch checkpoints, best.ckpt, final.ckpt,
  /// training_log.json and the effective config.
  std::optional<std::filesystem::path> output_dir;
  std::function<void(const EpochRow&)> on_epoch;
};

struct TrainResult {
  model::MsFIN model;  // weights after the last epoch
  TrainingLog log;
  std::size_t best_epoch = 0;
};

/// Deterministic mini-batch AdamW training. Each epoch visits the training
/// records in an order drawn from derive_seed(seed, 1000 + epoch); per-video
/// losses are averaged over the batch and gradients accumulate in batch order.
/// A non-finite loss or gradient aborts with ErrorKind::Numerical.
TrainResult train(const RunConfig& cfg, const std::vector<SequenceRecord>& train_set,
                  const std::vector<SequenceRecord>& eval_set, const TrainOptions& options = {});

metrics::VideoPrediction to_prediction(const SequenceRecord& r, std::vector<double> probs);
std::vector<metrics::VideoPrediction> predict(const model::MsFIN& net, const std::vector<SequenceRecord>& records);

/// Positives whose id starts with `prefix` plus every negative.
std::vector<metrics::VideoPrediction> subset_by_prefix(const std::vector<metrics::VideoPrediction>& preds,
                                                       const std::string& prefix);

struct AblationRow {
  std::string experiment;
  model::ModelSwitches switches;
  metrics::EvalReport report;
};

/// Parses "S,M,L,sam" into one experiment per item; "S+M" disables both in a
/// single experiment. Returns the switch names per experiment.
std::vector<std::vector<std::string>> parse_switch_list(const std::string& list);
/// Applies switch names to a copy of `base`; rejects removing every scale.
model::ModelSwitches apply_switches(model::ModelSwitches base, const std::vector<std::string>& names);

/// Baseline plus one run per experiment, all sharing seed and data split.
std::vector<AblationRow> run_ablation(const RunConfig& base, const std::vector<std::vector<std::string>>& experiments,
                                      const DataBundle& data);

}  // namespace msfin::train
