#include "msfin/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "msfin/checkpoint.hpp"
#include "msfin/errors.hpp"
#include "msfin/feature_io.hpp"
#include "msfin/ops.hpp"
#include "msfin/rng.hpp"

namespace msfin::train {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::vector<std::string>& known, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::Config, where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      fail(ErrorKind::Config, "unknown key '" + key + "' in " + where);
    }
  }
}

json loss_to_json(const loss::LossConfig& l) {
  return {{"variant", loss::to_string(l.variant)}, {"alpha", l.alpha}, {"gamma", l.gamma}, {"fps", l.fps}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

double grad_norm(const ParamStore& store) {
  double sq = 0;
  for (const auto& e : store.entries()) {
    if (!e.tensor.has_grad()) continue;
    for (double g : e.tensor.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  loss.validate();
  optimizer.validate();
  if (batch_size < 1) fail(ErrorKind::Config, "batch_size must be >= 1");
  if (epochs < 1) fail(ErrorKind::Config, "epochs must be >= 1");
  if (!(data.val_fraction >= 0 && data.val_fraction < 1)) fail(ErrorKind::Config, "data.val_fraction must lie in [0, 1)");
  if (data.train_path.empty() && !data.synthetic_per_archetype) {
    fail(ErrorKind::Config, "data needs a train path or a synthetic block");
  }
}

json to_json(const RunConfig& c) {
  json data = {{"val_fraction", c.data.val_fraction}};
  if (!c.data.train_path.empty()) data["train"] = c.data.train_path;
  if (!c.data.test_path.empty()) data["test"] = c.data.test_path;
  if (c.data.synthetic_per_archetype) {
    data["synthetic"] = {{"n_per_archetype", *c.data.synthetic_per_archetype},
                         {"scenario", synth::to_json(c.data.synthetic_base)}};
  }
  return {{"model", model::to_json(c.model)},
          {"loss", loss_to_json(c.loss)},
          {"optimizer", optim::to_json(c.optimizer)},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"data", data},
          {"output_dir", c.output_dir},
          {"save_epoch_checkpoints", c.save_epoch_checkpoints}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    reject_unknown(j, {"model", "loss", "optimizer", "batch_size", "epochs", "seed", "data", "output_dir",
                       "save_epoch_checkpoints", "ablation"},
                   "run config");
    if (j.contains("model")) c.model = model::config_from_json(j.at("model"));
    c.loss.fps = c.model.fps;
    if (j.contains("loss")) {
      const auto& l = j.at("loss");
      reject_unknown(l, {"variant", "alpha", "gamma", "fps"}, "loss");
      if (l.contains("variant")) c.loss.variant = loss::parse_variant(l.at("variant").get<std::string>());
      c.loss.alpha = l.value("alpha", c.loss.alpha);
      c.loss.gamma = l.value("gamma", c.loss.gamma);
      c.loss.fps = l.value("fps", c.loss.fps);
    }
    if (j.contains("optimizer")) c.optimizer = optim::adamw_from_json(j.at("optimizer"));
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.save_epoch_checkpoints = j.value("save_epoch_checkpoints", c.save_epoch_checkpoints);
    if (j.contains("data")) {
      const auto& d = j.at("data");
      reject_unknown(d, {"train", "test", "synthetic", "val_fraction"}, "data");
      c.data.train_path = d.value("train", std::string());
      c.data.test_path = d.value("test", std::string());
      c.data.val_fraction = d.value("val_fraction", c.data.val_fraction);
      if (d.contains("synthetic")) {
        const auto& s = d.at("synthetic");
        reject_unknown(s, {"n_per_archetype", "scenario"}, "data.synthetic");
        c.data.synthetic_per_archetype = s.value("n_per_archetype", std::size_t{20});
        if (s.contains("scenario")) c.data.synthetic_base = synth::spec_from_json(s.at("scenario"));
      }
    }
    if (j.contains("ablation")) {
      const auto& a = j.at("ablation");
      reject_unknown(a, {"disable", "temporal"}, "ablation");
      std::vector<std::string> names;
      for (const auto& item : a.value("disable", json::array())) names.push_back(item.get<std::string>());
      const auto temporal = a.value("temporal", std::string("ctm"));
      if (temporal == "none") {
        names.emplace_back("ctm");
      } else if (temporal != "ctm") {
        fail(ErrorKind::Config, "ablation.temporal must be 'ctm' or 'none'");
      }
      c.model.switches = apply_switches(c.model.switches, names);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed run config: ") + e.what());
  }
  c.validate();
  return c;
}

void apply_env_overrides(RunConfig& c) {
  const char* env = std::getenv("MSFIN_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0' || env[0] == '-') {
    fail(ErrorKind::Config, std::string("MSFIN_SEED is not an unsigned integer: '") + env + "'");
  }
  c.seed = v;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  RunConfig c = run_config_from_json(j);
  apply_env_overrides(c);
  return c;
}

std::string config_hash(const RunConfig& c) {
  const std::string text = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void check_compatible(const model::MsFINConfig& cfg, const std::vector<SequenceRecord>& records) {
  for (const auto& r : records) {
    if (r.feature_dim != cfg.d_in) {
      fail(ErrorKind::ShapeInconsistency, "record '" + r.id + "' has d_in " + std::to_string(r.feature_dim) +
                                              ", model expects " + std::to_string(cfg.d_in));
    }
    if (r.frames > cfg.t_max) {
      fail(ErrorKind::ShapeInconsistency, "record '" + r.id + "' has " + std::to_string(r.frames) +
                                              " frames, model t_max is " + std::to_string(cfg.t_max));
    }
  }
}

DataBundle load_data(const RunConfig& c) {
  DataBundle b;
  std::vector<SequenceRecord> pool;
  if (!c.data.train_path.empty()) {
    pool = io::read_dataset(c.data.train_path);
  } else {
    synth::ScenarioSpec base = c.data.synthetic_base;
    base.feature_dim = c.model.d_in;
    if (!base.t_ao) base.t_ao = static_cast<int>(base.frames - base.frames / 5);
    pool = synth::generate_dataset(*c.data.synthetic_per_archetype, base, derive_seed(c.seed, 7)).records;
  }
  if (!c.data.test_path.empty()) {
    b.train = std::move(pool);
    b.eval = io::read_dataset(c.data.test_path);
  } else if (std::any_of(pool.begin(), pool.end(), [](const auto& r) { return r.split == "test"; })) {
    for (auto& r : pool) (r.split == "test" ? b.eval : b.train).push_back(std::move(r));
  } else {
    const auto split = synth::split_indices(pool.size(), c.data.val_fraction, derive_seed(c.seed, 8));
    for (auto i : split.train) {
      pool[i].split = "train";
      b.train.push_back(pool[i]);
    }
    for (auto i : split.test) {
      pool[i].split = "test";
      b.eval.push_back(pool[i]);
    }
  }
  if (b.train.empty()) fail(ErrorKind::ShapeInconsistency, "training set is empty");
  check_compatible(c.model, b.train);
  check_compatible(c.model, b.eval);
  return b;
}

json TrainingLog::to_json() const {
  json rows_j = json::array();
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  for (const auto& r : rows) {
    rows_j.push_back({{"epoch", r.epoch},
                      {"train_loss", r.train_loss},
                      {"val_ap", opt(r.val_ap)},
                      {"val_mtta_s", opt(r.val_mtta)},
                      {"seconds", r.seconds}});
  }
  return {{"seed", seed}, {"config_hash", config_hash}, {"wall_seconds", wall_seconds}, {"epochs", rows_j}};
}

metrics::VideoPrediction to_prediction(const SequenceRecord& r, std::vector<double> probs) {
  metrics::VideoPrediction v;
  v.probs = std::move(probs);
  v.label = r.label;
  v.t_ao = r.t_ao;
  v.fps = r.fps;
  v.id = r.id;
  return v;
}

std::vector<metrics::VideoPrediction> predict(const model::MsFIN& net, const std::vector<SequenceRecord>& records) {
  std::vector<metrics::VideoPrediction> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(to_prediction(r, net.forward(r).probs));
  return out;
}

std::vector<metrics::VideoPrediction> subset_by_prefix(const std::vector<metrics::VideoPrediction>& preds,
                                                       const std::string& prefix) {
  std::vector<metrics::VideoPrediction> out;
  for (const auto& p : preds) {
    if (p.label == 0 || p.id.rfind(prefix, 0) == 0) out.push_back(p);
  }
  return out;
}

TrainResult train(const RunConfig& cfg, const std::vector<SequenceRecord>& train_set,
                  const std::vector<SequenceRecord>& eval_set, const TrainOptions& options) {
  cfg.validate();
  if (train_set.empty()) fail(ErrorKind::ShapeInconsistency, "training set is empty");
  check_compatible(cfg.model, train_set);
  check_compatible(cfg.model, eval_set);

  const auto wall_start = std::chrono::steady_clock::now();
  TrainResult result{model::MsFIN(cfg.model, derive_seed(cfg.seed, 0)), {}, 0};
  model::MsFIN& net = result.model;
  result.log.seed = cfg.seed;
  result.log.config_hash = config_hash(cfg);
  optim::AdamW opt(net.params().entries(), cfg.optimizer);

  const auto& dir = options.output_dir;
  const json meta = {{"config_hash", result.log.config_hash}, {"seed", cfg.seed}};
  if (dir) {
    std::filesystem::create_directories(*dir);
    write_text(*dir / "config.json", to_json(cfg).dump(2) + "\n");
  }

  std::optional<double> best_ap;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle(derive_seed(cfg.seed, 1000 + epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }

    double loss_total = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      net.params().zero_grad();
      double batch_loss = 0;
      for (std::size_t k = start; k < stop; ++k) {
        const SequenceRecord& r = train_set[order[k]];
        try {
          const Tensor probs = net.forward_probs(r);
          const Tensor l = loss::sequence_loss(probs, {r.label, r.t_ao}, cfg.loss);
          batch_loss += l.item();
          backward(ops::scale(l, inv_batch));
        } catch (const Error& e) {
          // Overflowed activations are caught inside the forward pass.
          if (e.kind() != ErrorKind::Contract || std::string(e.what()).find("non-finite") == std::string::npos) throw;
          std::ostringstream msg;
          msg << "non-finite training state at epoch " << epoch << ", batch " << batch_index + 1 << ", record '"
              << r.id << "' (grad-norm " << grad_norm(net.params()) << " before the failure): " << e.what();
          fail(ErrorKind::Numerical, msg.str());
        }
      }
      const double norm = grad_norm(net.params());
      if (!std::isfinite(batch_loss) || !std::isfinite(norm)) {
        std::ostringstream msg;
        msg << "non-finite training state at epoch " << epoch << ", batch " << batch_index + 1 << ": loss "
            << batch_loss << ", grad-norm " << norm;
        fail(ErrorKind::Numerical, msg.str());
      }
      opt.step();
      loss_total += batch_loss;
    }

    EpochRow row;
    row.epoch = epoch;
    row.train_loss = loss_total / static_cast<double>(train_set.size());
    if (!eval_set.empty()) {
      const auto preds = predict(net, eval_set);
      try {
        row.val_ap = metrics::average_precision(preds);
        row.val_mtta = metrics::mtta(preds);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::UndefinedMetric) throw;
      }
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    result.log.rows.push_back(row);

    const bool improved = row.val_ap && (!best_ap || *row.val_ap > *best_ap);
    if (improved) {
      best_ap = row.val_ap;
      result.best_epoch = epoch;
    }
    if (dir) {
      json m = meta;
      m["epoch"] = epoch;
      if (cfg.save_epoch_checkpoints) {
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%03zu.ckpt", epoch);
        save_checkpoint(net, *dir / name, m);
      }
      if (improved) save_checkpoint(net, *dir / "best.ckpt", m);
    }
    if (options.on_epoch) options.on_epoch(row);
  }

  result.log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  if (dir) {
    json m = meta;
    m["epoch"] = cfg.epochs;
    save_checkpoint(net, *dir / "final.ckpt", m);
    write_text(*dir / "training_log.json", result.log.to_json().dump(2) + "\n");
  }
  return result;
}

std::vector<std::vector<std::string>> parse_switch_list(const std::string& list) {
  std::vector<std::vector<std::string>> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::vector<std::string> names;
    std::stringstream parts(item);
    std::string name;
    while (std::getline(parts, name, '+')) {
      if (!name.empty()) names.push_back(name);
    }
    if (!names.empty()) out.push_back(names);
  }
  if (out.empty()) fail(ErrorKind::Config, "switch list is empty");
  return out;
}

model::ModelSwitches apply_switches(model::ModelSwitches s, const std::vector<std::string>& names) {
  for (const auto& name : names) {
    if (name == "short" || name == "S") s.short_scale = false;
    else if (name == "mid" || name == "M") s.mid_scale = false;
    else if (name == "long" || name == "L") s.long_scale = false;
    else if (name == "sam") s.sam = false;
    else if (name == "cam_pre") s.cam_pre = false;
    else if (name == "cam_post") s.cam_post = false;
    else if (name == "ctm") s.ctm = false;
    else fail(ErrorKind::Config, "unknown ablation switch '" + name + "'");
  }
  if (!s.short_scale && !s.mid_scale && !s.long_scale) {
    fail(ErrorKind::Config, "disabling every scale leaves no scene branch");
  }
  return s;
}

std::vector<AblationRow> run_ablation(const RunConfig& base, const std::vector<std::vector<std::string>>& experiments,
                                      const DataBundle& data) {
  std::vector<std::pair<std::string, model::ModelSwitches>> runs = {{"baseline", base.model.switches}};
  for (const auto& names : experiments) {
    std::string label = "w/o ";
    for (std::size_t i = 0; i < names.size(); ++i) label += (i ? "+" : "") + names[i];
    runs.emplace_back(label, apply_switches(base.model.switches, names));
  }
  std::vector<AblationRow> rows;
  for (const auto& [label, switches] : runs) {
    RunConfig cfg = base;
    cfg.model.switches = switches;
    auto result = train(cfg, data.train, data.eval);
    rows.push_back({label, switches, metrics::evaluate(predict(result.model, data.eval))});
  }
  return rows;
}

}  // namespace msfin::train
