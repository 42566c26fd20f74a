#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "msfin/attention.hpp"
#include "msfin/multiscale.hpp"
#include "msfin/params.hpp"
#include "msfin/record.hpp"

namespace msfin::model {

/// Architecture switches used by the ablation harness. Disabling a scale drops
/// its pooling branch, its temporal stack and its post-fusion stack.
struct ModelSwitches {
  bool short_scale = true;
  bool mid_scale = true;
  bool long_scale = true;
  bool sam = true;
  bool cam_pre = true;
  bool cam_post = true;
  bool ctm = true;

  std::array<bool, 3> scales() const { return {short_scale, mid_scale, long_scale}; }
  bool operator==(const ModelSwitches&) const = default;
};

struct MsFINConfig {
  std::size_t d_in = 4096;
  std::size_t d = 512;
  std::size_t n_objects = 19;
  std::size_t heads = 4;
  std::size_t layers_sam = 2;
  std::size_t layers_cam = 2;  // both pre- and post-fusion cross-attention stacks
  std::size_t layers_ctm = 2;
  int fps = 20;
  attn::AttnNorm attn_norm = attn::AttnNorm::softmax;
  std::size_t d_ff = 0;    // 0 -> 2 d
  std::size_t mlp_h1 = 0;  // 0 -> d
  std::size_t mlp_h2 = 0;  // 0 -> d / 4
  std::size_t t_max = 256;
  bool share_msm_fusion = false;
  ModelSwitches switches;

  /// Copy with every 0-means-default field filled in.
  MsFINConfig resolved() const;
  /// Throws ErrorKind::Config on an invalid combination.
  void validate() const;
  std::size_t enabled_scales() const;
  msm::MultiScaleConfig windows() const { return msm::window_sizes_from_fps(fps, d); }
};

nlohmann::json to_json(const MsFINConfig& cfg);
MsFINConfig config_from_json(const nlohmann::json& j);

struct ScaleAttention {
  msm::Scale scale = msm::Scale::short_term;
  std::size_t heads = 0, frames = 0, objects = 0;
  std::vector<double> weights;  // heads x T x N

  double at(std::size_t h, std::size_t t, std::size_t n) const {
    return weights[(h * frames + t) * objects + n];
  }
  /// Head-averaged weight of object n at frame t.
  double mean_at(std::size_t t, std::size_t n) const;
};

/// Per-frame accident probabilities plus the post-fusion attention per scale.
struct RiskSeries {
  std::vector<double> probs;
  std::vector<ScaleAttention> attention;
  std::size_t objects = 0;
  std::vector<std::uint8_t> object_mask;  // effective mask, T x N
};

struct EmbeddedInputs {
  Tensor frames;   // [T, d]
  Tensor objects;  // [T, N, d]
  std::vector<std::uint8_t> valid;  // T x N, after no-object substitution
};

struct TemporalOutputs {
  Tensor objects;                // [N, T, d], one causal sequence per object
  std::array<Tensor, 3> scenes;  // [T, d] per enabled scale
};

struct PostFusion {
  std::array<Tensor, 3> fused;    // [T, d] per enabled scale
  std::array<Tensor, 3> weights;  // [T, heads, 1, N] final-layer weights
};

class MsFIN {
 public:
  /// Parameters are initialized from `seed`: uniform +-sqrt(1/fan_in) for
  /// linear maps, zeros for the positional table, unit/zero for LayerNorms.
  explicit MsFIN(MsFINConfig cfg, std::uint64_t seed = 0);

  const MsFINConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  EmbeddedInputs embed_inputs(const SequenceRecord& record) const;
  /// Object interactions within each frame (SaM) and scene-to-object
  /// interaction (CaM), merged by a linear layer. Returns [T, N, d].
  Tensor aggregate_objects(const EmbeddedInputs& in) const;
  std::array<Tensor, 3> aggregate_scenes(const Tensor& frames) const;
  /// `valid` (T x N, empty = all valid) hides padded steps of each object's
  /// sequence from later frames.
  TemporalOutputs temporal_process(const Tensor& objects, const std::array<Tensor, 3>& scenes,
                                   const std::vector<std::uint8_t>& valid = {}) const;
  PostFusion post_fuse(const TemporalOutputs& temporal, const std::vector<std::uint8_t>& valid) const;
  /// Sigmoid probabilities [T] from the concatenated fused scales.
  Tensor predict_risk(const std::array<Tensor, 3>& fused) const;

  /// Whole pipeline as a differentiable graph; fills `post` when given.
  Tensor forward_probs(const SequenceRecord& record, PostFusion* post = nullptr) const;
  /// Inference: no graph is recorded.
  RiskSeries forward(const SequenceRecord& record) const;

 private:
  MsFINConfig cfg_;
  ParamStore store_;
  Tensor embed_frame_w_, embed_frame_b_, embed_object_w_, embed_object_b_;
  Tensor pos_enc_, no_object_token_;
  std::vector<attn::AttentionBlockParams> sam_, cam_pre_, ctm_object_;
  std::array<std::vector<attn::AttentionBlockParams>, 3> ctm_scene_, cam_post_;
  Tensor agg_w_, agg_b_;
  msm::MsMParams msm_;
  Tensor mlp_w1_, mlp_b1_, mlp_w2_, mlp_b2_, mlp_w3_, mlp_b3_;
};

}  // namespace msfin::model
