#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "msfin/record.hpp"

namespace msfin::synth {

/// Risk signatures at three temporal horizons, plus a noise-only negative.
///  sudden:    step of amplitude A starting round(fps/3) frames before t_ao
///  gradual:   linear ramp 0 -> A over [t_ao - 2 fps, t_ao], A afterwards
///  early_cue: one-frame pulse A at t_ao - 3 fps, then a sub-noise ramp to A/40
///  benign:    noise only
enum class Archetype { sudden, gradual, early_cue, benign };

std::string to_string(Archetype a);
Archetype parse_archetype(const std::string& s);

struct ScenarioSpec {
  Archetype archetype = Archetype::benign;
  std::size_t frames = 50;       // T
  std::size_t objects = 6;       // N
  std::size_t feature_dim = 64;  // d_in
  int fps = 10;
  std::optional<int> t_ao;  // required unless benign
  std::size_t risk_object_index = 0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
  /// Signature amplitude; defaults to 4 sigma (1.0 when sigma is 0).
  std::optional<double> amplitude;
  /// Width of the channel block carrying the signature, starting at channel 0;
  /// defaults to max(1, d_in / 8).
  std::optional<std::size_t> risk_channels;
  /// Valid object slots (leading); drawn from [risk_object_index + 1, N] when unset.
  std::optional<std::size_t> valid_objects;

  double resolved_amplitude() const;
  std::size_t resolved_risk_channels() const;
  void validate() const;
};

nlohmann::json to_json(const ScenarioSpec& spec);
ScenarioSpec spec_from_json(const nlohmann::json& j);

/// Noise-free signature value at 1-based frame t.
double signature(const ScenarioSpec& spec, int t);

/// Deterministic in `spec` (including its seed).
SequenceRecord generate_scenario(const ScenarioSpec& spec, const std::string& id = "");

struct GeneratedDataset {
  std::vector<SequenceRecord> records;
  std::vector<ScenarioSpec> specs;  // one per record, fully resolved
  std::uint64_t master_seed = 0;

  /// {"master_seed", "records": [{"id", "spec"}]}
  nlohmann::json manifest() const;
};

/// n positives of each signature archetype plus 3 n benign records. Record k
/// (in that order) uses seed derive_seed(master, k) for its noise and draws its
/// risk object from a second stream derive_seed(master, k + 2^32).
GeneratedDataset generate_dataset(std::size_t n_per_archetype, const ScenarioSpec& base,
                                  std::uint64_t seed);

/// Rebuilds every record from a manifest; bit-identical to the original.
std::vector<SequenceRecord> regenerate(const nlohmann::json& manifest);

/// Seeded Fisher-Yates shuffle, then the last round(n * test_fraction) records
/// become the test split. Split tags are written into the records.
struct Split {
  std::vector<std::size_t> train, test;
};
Split split_indices(std::size_t n, double test_fraction, std::uint64_t seed);

/// Per-frame mean of the signature channels of the risk object: a learning-free
/// matched filter that knows where the signal is planted.
std::vector<double> matched_filter(const SequenceRecord& record, const ScenarioSpec& spec);

}  // namespace msfin::synth
