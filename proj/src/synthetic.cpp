#include "msfin/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "msfin/errors.hpp"
#include "msfin/rng.hpp"

namespace msfin::synth {

std::string to_string(Archetype a) {
  switch (a) {
    case Archetype::sudden: return "sudden";
    case Archetype::gradual: return "gradual";
    case Archetype::early_cue: return "early_cue";
    case Archetype::benign: return "benign";
  }
  return "?";
}

Archetype parse_archetype(const std::string& s) {
  for (auto a : {Archetype::sudden, Archetype::gradual, Archetype::early_cue, Archetype::benign}) {
    if (to_string(a) == s) return a;
  }
  fail(ErrorKind::Config, "unknown archetype '" + s + "'");
}

double ScenarioSpec::resolved_amplitude() const {
  if (amplitude) return *amplitude;
  return noise_sigma > 0 ? 4.0 * noise_sigma : 1.0;
}

std::size_t ScenarioSpec::resolved_risk_channels() const {
  return risk_channels ? *risk_channels : std::max<std::size_t>(1, feature_dim / 8);
}

void ScenarioSpec::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorKind::Config, "scenario: " + m); };
  if (frames == 0 || objects == 0 || feature_dim == 0) bad("T, N and d_in must be positive");
  if (fps < 1) bad("fps must be >= 1");
  if (noise_sigma < 0) bad("noise_sigma must be >= 0");
  if (risk_object_index >= objects) bad("risk_object_index must be < N");
  if (resolved_risk_channels() > feature_dim) bad("risk channel block exceeds d_in");
  if (valid_objects && (*valid_objects <= risk_object_index || *valid_objects > objects)) {
    bad("valid_objects must cover the risk object and not exceed N");
  }
  if (archetype == Archetype::benign) {
    if (t_ao) bad("benign scenarios carry no t_ao");
  } else {
    if (!t_ao) bad(to_string(archetype) + " scenario needs t_ao");
    if (*t_ao < fps || static_cast<std::size_t>(*t_ao) > frames) bad("t_ao must satisfy fps <= t_ao <= T");
  }
}

nlohmann::json to_json(const ScenarioSpec& s) {
  nlohmann::json j = {{"archetype", to_string(s.archetype)},
                      {"T", s.frames},
                      {"N", s.objects},
                      {"d_in", s.feature_dim},
                      {"fps", s.fps},
                      {"t_ao", s.t_ao ? nlohmann::json(*s.t_ao) : nlohmann::json(nullptr)},
                      {"risk_object_index", s.risk_object_index},
                      {"noise_sigma", s.noise_sigma},
                      {"seed", s.seed}};
  if (s.amplitude) j["amplitude"] = *s.amplitude;
  if (s.risk_channels) j["risk_channels"] = *s.risk_channels;
  if (s.valid_objects) j["valid_objects"] = *s.valid_objects;
  return j;
}

ScenarioSpec spec_from_json(const nlohmann::json& j) {
  try {
    ScenarioSpec s;
    s.archetype = parse_archetype(j.value("archetype", std::string("benign")));
    s.frames = j.value("T", s.frames);
    s.objects = j.value("N", s.objects);
    s.feature_dim = j.value("d_in", s.feature_dim);
    s.fps = j.value("fps", s.fps);
    if (j.contains("t_ao") && !j.at("t_ao").is_null()) s.t_ao = j.at("t_ao").get<int>();
    s.risk_object_index = j.value("risk_object_index", s.risk_object_index);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.seed = j.value("seed", s.seed);
    if (j.contains("amplitude")) s.amplitude = j.at("amplitude").get<double>();
    if (j.contains("risk_channels")) s.risk_channels = j.at("risk_channels").get<std::size_t>();
    if (j.contains("valid_objects")) s.valid_objects = j.at("valid_objects").get<std::size_t>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed scenario block: ") + e.what());
  }
}

double signature(const ScenarioSpec& spec, int t) {
  if (spec.archetype == Archetype::benign) return 0.0;
  const double a = spec.resolved_amplitude();
  const int t_ao = *spec.t_ao;
  switch (spec.archetype) {
    case Archetype::sudden: {
      const int onset = std::max(1, t_ao - std::max(1, (2 * spec.fps + 3) / 6));
      return t >= onset ? a : 0.0;
    }
    case Archetype::gradual: {
      const int start = std::max(1, t_ao - 2 * spec.fps);
      if (t <= start) return 0.0;
      if (t >= t_ao) return a;
      return a * static_cast<double>(t - start) / static_cast<double>(t_ao - start);
    }
    case Archetype::early_cue: {
      const int pulse = std::max(1, t_ao - 3 * spec.fps);
      const double drift = a / 40.0;
      if (t < pulse) return 0.0;
      if (t == pulse) return a;
      if (t >= t_ao) return drift;
      return drift * static_cast<double>(t - pulse) / static_cast<double>(t_ao - pulse);
    }
    case Archetype::benign: break;
  }
  return 0.0;
}

SequenceRecord generate_scenario(const ScenarioSpec& spec, const std::string& id) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t steps = spec.frames, n = spec.objects, din = spec.feature_dim;
  const std::size_t valid_objects =
      spec.valid_objects ? *spec.valid_objects
                         : static_cast<std::size_t>(rng.uniform_int(
                               static_cast<std::int64_t>(spec.risk_object_index + 1),
                               static_cast<std::int64_t>(n)));
  const std::size_t block = spec.resolved_risk_channels();

  SequenceRecord r;
  r.id = id.empty() ? to_string(spec.archetype) + "-" + std::to_string(spec.seed) : id;
  r.frames = steps;
  r.objects = n;
  r.feature_dim = din;
  r.fps = spec.fps;
  r.label = spec.archetype == Archetype::benign ? 0 : 1;
  r.t_ao = spec.t_ao;
  r.frame_features.assign(steps * din, 0.0f);
  r.object_features.assign(steps * n * din, 0.0f);
  r.object_mask.assign(steps * n, 0);

  std::vector<double> scene(din);
  for (std::size_t t = 0; t < steps; ++t) {
    const double sig = signature(spec, static_cast<int>(t + 1));
    std::fill(scene.begin(), scene.end(), 0.0);
    for (std::size_t k = 0; k < valid_objects; ++k) {
      r.object_mask[t * n + k] = 1;
      for (std::size_t c = 0; c < din; ++c) {
        double v = spec.noise_sigma * rng.normal();
        if (k == spec.risk_object_index && c < block) v += sig;
        const float stored = static_cast<float>(v);
        r.object_features[(t * n + k) * din + c] = stored;
        scene[c] += stored;
      }
    }
    for (std::size_t c = 0; c < din; ++c) {
      r.frame_features[t * din + c] =
          static_cast<float>(scene[c] / static_cast<double>(valid_objects) + spec.noise_sigma * rng.normal());
    }
  }
  return r;
}

nlohmann::json GeneratedDataset::manifest() const {
  nlohmann::json recs = nlohmann::json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    recs.push_back({{"id", records[i].id}, {"spec", to_json(specs[i])}});
  }
  return {{"master_seed", master_seed}, {"records", recs}};
}

GeneratedDataset generate_dataset(std::size_t n_per_archetype, const ScenarioSpec& base,
                                  std::uint64_t seed) {
  if (n_per_archetype < 1) fail(ErrorKind::Config, "n_per_archetype must be >= 1");
  GeneratedDataset ds;
  ds.master_seed = seed;
  std::uint64_t counter = 0;
  auto emit = [&](Archetype a) {
    ScenarioSpec s = base;
    s.archetype = a;
    s.seed = derive_seed(seed, counter);
    Rng pick(derive_seed(seed, counter + (1ULL << 32)));
    s.risk_object_index = static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(s.objects) - 1));
    s.valid_objects = static_cast<std::size_t>(pick.uniform_int(
        static_cast<std::int64_t>(s.risk_object_index + 1), static_cast<std::int64_t>(s.objects)));
    if (a == Archetype::benign) {
      s.t_ao.reset();
    } else if (!s.t_ao) {
      fail(ErrorKind::Config, "base scenario needs t_ao for positive archetypes");
    }
    char id[64];
    std::snprintf(id, sizeof id, "%s-%04llu", to_string(a).c_str(),
                  static_cast<unsigned long long>(counter));
    ds.records.push_back(generate_scenario(s, id));
    ds.specs.push_back(s);
    ++counter;
  };
  for (auto a : {Archetype::sudden, Archetype::gradual, Archetype::early_cue}) {
    for (std::size_t i = 0; i < n_per_archetype; ++i) emit(a);
  }
  for (std::size_t i = 0; i < 3 * n_per_archetype; ++i) emit(Archetype::benign);
  return ds;
}

std::vector<SequenceRecord> regenerate(const nlohmann::json& manifest) {
  std::vector<SequenceRecord> out;
  try {
    for (const auto& entry : manifest.at("records")) {
      out.push_back(generate_scenario(spec_from_json(entry.at("spec")), entry.at("id").get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed manifest: ") + e.what());
  }
  return out;
}

Split split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (test_fraction < 0 || test_fraction > 1) fail(ErrorKind::Config, "test fraction must lie in [0, 1]");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  const auto n_test = static_cast<std::size_t>(std::lround(static_cast<double>(n) * test_fraction));
  Split s;
  s.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_test));
  s.test.assign(order.end() - static_cast<std::ptrdiff_t>(n_test), order.end());
  return s;
}

std::vector<double> matched_filter(const SequenceRecord& record, const ScenarioSpec& spec) {
  const std::size_t block = spec.resolved_risk_channels();
  std::vector<double> out(record.frames);
  for (std::size_t t = 0; t < record.frames; ++t) {
    double total = 0;
    for (std::size_t c = 0; c < block; ++c) total += record.object_at(t, spec.risk_object_index, c);
    out[t] = total / static_cast<double>(block);
  }
  return out;
}

}  // namespace msfin::synth
