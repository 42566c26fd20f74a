#include "msfin/model.hpp"

#include "msfin/errors.hpp"
#include "msfin/ops.hpp"

namespace msfin::model {

MsFINConfig MsFINConfig::resolved() const {
  MsFINConfig c = *this;
  if (c.d_ff == 0) c.d_ff = 2 * c.d;
  if (c.mlp_h1 == 0) c.mlp_h1 = c.d;
  if (c.mlp_h2 == 0) c.mlp_h2 = std::max<std::size_t>(1, c.d / 4);
  return c;
}

std::size_t MsFINConfig::enabled_scales() const {
  const auto s = switches.scales();
  return static_cast<std::size_t>(s[0]) + s[1] + s[2];
}

void MsFINConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorKind::Config, m); };
  if (d_in == 0 || d == 0) bad("d_in and d must be positive");
  if (heads == 0 || d % heads != 0) {
    bad("d=" + std::to_string(d) + " is not divisible by heads=" + std::to_string(heads));
  }
  if (layers_sam < 1 || layers_cam < 1 || layers_ctm < 1) bad("every layer count must be >= 1");
  if (n_objects < 1) bad("n_objects must be >= 1");
  if (fps < 1) bad("fps must be >= 1");
  if (t_max < 1) bad("t_max must be >= 1");
  if (enabled_scales() == 0) bad("at least one temporal scale must stay enabled");
}

namespace {

const char* kScaleKeys[3] = {"short", "mid", "long"};

}  // namespace

nlohmann::json to_json(const MsFINConfig& cfg) {
  nlohmann::json disabled = nlohmann::json::array();
  const auto& s = cfg.switches;
  if (!s.short_scale) disabled.push_back("short");
  if (!s.mid_scale) disabled.push_back("mid");
  if (!s.long_scale) disabled.push_back("long");
  if (!s.sam) disabled.push_back("sam");
  if (!s.cam_pre) disabled.push_back("cam_pre");
  if (!s.cam_post) disabled.push_back("cam_post");
  if (!s.ctm) disabled.push_back("ctm");
  return {{"d_in", cfg.d_in},
          {"d", cfg.d},
          {"n_objects", cfg.n_objects},
          {"heads", cfg.heads},
          {"layers_sam", cfg.layers_sam},
          {"layers_cam", cfg.layers_cam},
          {"layers_ctm", cfg.layers_ctm},
          {"fps", cfg.fps},
          {"attn_norm", attn::to_string(cfg.attn_norm)},
          {"d_ff", cfg.d_ff},
          {"mlp_hidden", {cfg.mlp_h1, cfg.mlp_h2}},
          {"t_max", cfg.t_max},
          {"share_msm_fusion", cfg.share_msm_fusion},
          {"disable", disabled}};
}

MsFINConfig config_from_json(const nlohmann::json& j) {
  MsFINConfig c;
  try {
    if (!j.is_object()) fail(ErrorKind::Config, "model config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
      static const std::vector<std::string> known = {
          "d_in", "d", "n_objects", "heads", "layers_sam", "layers_cam", "layers_ctm", "fps",
          "attn_norm", "d_ff", "mlp_hidden", "t_max", "share_msm_fusion", "disable"};
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        fail(ErrorKind::Config, "unknown model config key '" + key + "'");
      }
    }
    c.d_in = j.value("d_in", c.d_in);
    c.d = j.value("d", c.d);
    c.n_objects = j.value("n_objects", c.n_objects);
    c.heads = j.value("heads", c.heads);
    c.layers_sam = j.value("layers_sam", c.layers_sam);
    c.layers_cam = j.value("layers_cam", c.layers_cam);
    c.layers_ctm = j.value("layers_ctm", c.layers_ctm);
    c.fps = j.value("fps", c.fps);
    c.attn_norm = attn::parse_attn_norm(j.value("attn_norm", std::string("softmax")));
    c.d_ff = j.value("d_ff", c.d_ff);
    if (j.contains("mlp_hidden")) {
      const auto& h = j.at("mlp_hidden");
      if (!h.is_array() || h.size() != 2) fail(ErrorKind::Config, "mlp_hidden must hold two widths");
      c.mlp_h1 = h[0].get<std::size_t>();
      c.mlp_h2 = h[1].get<std::size_t>();
    }
    c.t_max = j.value("t_max", c.t_max);
    c.share_msm_fusion = j.value("share_msm_fusion", c.share_msm_fusion);
    for (const auto& item : j.value("disable", nlohmann::json::array())) {
      const auto name = item.get<std::string>();
      auto& s = c.switches;
      if (name == "short" || name == "S") s.short_scale = false;
      else if (name == "mid" || name == "M") s.mid_scale = false;
      else if (name == "long" || name == "L") s.long_scale = false;
      else if (name == "sam") s.sam = false;
      else if (name == "cam_pre") s.cam_pre = false;
      else if (name == "cam_post") s.cam_post = false;
      else if (name == "ctm") s.ctm = false;
      else fail(ErrorKind::Config, "unknown ablation switch '" + name + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed model config: ") + e.what());
  }
  return c;
}

double ScaleAttention::mean_at(std::size_t t, std::size_t n) const {
  double total = 0;
  for (std::size_t h = 0; h < heads; ++h) total += at(h, t, n);
  return total / static_cast<double>(heads);
}

MsFIN::MsFIN(MsFINConfig cfg, std::uint64_t seed) : cfg_(cfg.resolved()) {
  cfg_.validate();
  Rng rng(seed);
  const std::size_t d = cfg_.d;
  const auto& sw = cfg_.switches;
  auto blocks = [&](const std::string& prefix, std::size_t count) {
    std::vector<attn::AttentionBlockParams> out;
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(attn::AttentionBlockParams::create(store_, prefix + "." + std::to_string(i), d,
                                                       cfg_.d_ff, cfg_.heads, rng));
    }
    return out;
  };

  embed_frame_w_ = store_.add_uniform("embed_frame_w", {cfg_.d_in, d}, cfg_.d_in, rng);
  embed_frame_b_ = store_.add_uniform("embed_frame_b", {d}, cfg_.d_in, rng);
  embed_object_w_ = store_.add_uniform("embed_object_w", {cfg_.d_in, d}, cfg_.d_in, rng);
  embed_object_b_ = store_.add_uniform("embed_object_b", {d}, cfg_.d_in, rng);
  pos_enc_ = store_.add_constant("pos_enc", {cfg_.t_max, d}, 0.0);
  no_object_token_ = store_.add_uniform("no_object_token", {d}, d, rng);

  if (sw.sam) sam_ = blocks("sam", cfg_.layers_sam);
  if (sw.cam_pre) cam_pre_ = blocks("cam_pre", cfg_.layers_cam);
  const std::size_t agg_inputs = std::max<std::size_t>(1, std::size_t{sw.sam} + sw.cam_pre);
  agg_w_ = store_.add_uniform("agg_w", {agg_inputs * d, d}, agg_inputs * d, rng);
  agg_b_ = store_.add_uniform("agg_b", {d}, agg_inputs * d, rng);

  msm_ = msm::MsMParams::create(store_, "msm", d, cfg_.share_msm_fusion, rng, sw.scales());

  if (sw.ctm) ctm_object_ = blocks("ctm_object", cfg_.layers_ctm);
  for (std::size_t p = 0; p < 3; ++p) {
    if (!sw.scales()[p]) continue;
    if (sw.ctm) ctm_scene_[p] = blocks(std::string("ctm_") + kScaleKeys[p], cfg_.layers_ctm);
    if (sw.cam_post) cam_post_[p] = blocks(std::string("cam_post_") + kScaleKeys[p], cfg_.layers_cam);
  }

  const std::size_t head_in = cfg_.enabled_scales() * d;
  mlp_w1_ = store_.add_uniform("mlp_w1", {head_in, cfg_.mlp_h1}, head_in, rng);
  mlp_b1_ = store_.add_uniform("mlp_b1", {cfg_.mlp_h1}, head_in, rng);
  mlp_w2_ = store_.add_uniform("mlp_w2", {cfg_.mlp_h1, cfg_.mlp_h2}, cfg_.mlp_h1, rng);
  mlp_b2_ = store_.add_uniform("mlp_b2", {cfg_.mlp_h2}, cfg_.mlp_h1, rng);
  mlp_w3_ = store_.add_uniform("mlp_w3", {cfg_.mlp_h2, 1}, cfg_.mlp_h2, rng);
  mlp_b3_ = store_.add_uniform("mlp_b3", {1}, cfg_.mlp_h2, rng);
}

EmbeddedInputs MsFIN::embed_inputs(const SequenceRecord& record) const {
  const std::size_t steps = record.frames, n = record.objects, din = record.feature_dim;
  if (steps == 0) fail(ErrorKind::EmptySequence, "record '" + record.id + "' has no frames");
  if (din != cfg_.d_in) {
    fail(ErrorKind::Config, "record '" + record.id + "' has feature width " + std::to_string(din) +
                                ", model expects d_in=" + std::to_string(cfg_.d_in));
  }
  if (steps > cfg_.t_max) {
    fail(ErrorKind::Config, "record '" + record.id + "' has " + std::to_string(steps) +
                                " frames, positional table holds t_max=" + std::to_string(cfg_.t_max));
  }
  if (n == 0) fail(ErrorKind::Config, "record '" + record.id + "' has no object slots");
  const std::size_t d = cfg_.d;

  const Tensor raw_frames = Tensor::from(
      {steps, din}, std::vector<Scalar>(record.frame_features.begin(), record.frame_features.end()));
  // Objects are laid out [N, T, d_in] so the positional rows broadcast over N.
  std::vector<Scalar> obj(n * steps * din);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t c = 0; c < din; ++c) obj[(k * steps + t) * din + c] = record.object_at(t, k, c);
    }
  }
  const Tensor raw_objects = Tensor::from({n, steps, din}, std::move(obj));
  const Tensor pe = ops::slice(pos_enc_, 0, 0, steps);

  EmbeddedInputs out;
  out.frames = ops::add(ops::add(ops::matmul(raw_frames, embed_frame_w_), embed_frame_b_), pe);
  Tensor objects = ops::add(ops::add(ops::matmul(raw_objects, embed_object_w_), embed_object_b_), pe);
  objects = ops::permute(objects, {1, 0, 2});  // [T, N, d]

  out.valid = record.object_mask;
  std::vector<Scalar> keep(steps * n * d, 1.0), fill(steps * n * d, 0.0);
  bool any_empty = false;
  for (std::size_t t = 0; t < steps; ++t) {
    bool empty = true;
    for (std::size_t k = 0; k < n; ++k) empty = empty && !record.valid(t, k);
    if (!empty) continue;
    any_empty = true;
    out.valid[t * n] = 1;
    for (std::size_t c = 0; c < d; ++c) {
      keep[t * n * d + c] = 0.0;
      fill[t * n * d + c] = 1.0;
    }
  }
  if (any_empty) {
    objects = ops::add(ops::mul(objects, Tensor::from({steps, n, d}, std::move(keep))),
                       ops::mul(Tensor::from({steps, n, d}, std::move(fill)), no_object_token_));
  }
  out.objects = objects;
  return out;
}

Tensor MsFIN::aggregate_objects(const EmbeddedInputs& in) const {
  const std::size_t steps = in.objects.dim(0), n = in.objects.dim(1), d = cfg_.d;
  std::vector<std::uint8_t> padded(in.valid.size());
  for (std::size_t i = 0; i < padded.size(); ++i) padded[i] = in.valid[i] == 0;

  std::vector<Tensor> parts;
  if (cfg_.switches.sam) {
    parts.push_back(attn::stack(sam_, in.objects, attn::AttentionMask::key_padding(padded),
                                cfg_.attn_norm).out);
  }
  if (cfg_.switches.cam_pre) {
    const Tensor scene = ops::reshape(in.frames, {steps, 1, d});
    parts.push_back(attn::cross_stack(cam_pre_, in.objects, scene, attn::AttentionMask::none(),
                                      cfg_.attn_norm).out);
  }
  if (parts.empty()) parts.push_back(in.objects);
  const Tensor joined = parts.size() == 1 ? parts[0] : ops::concat(parts, -1);
  return ops::reshape(ops::add(ops::matmul(joined, agg_w_), agg_b_), {steps, n, d});
}

std::array<Tensor, 3> MsFIN::aggregate_scenes(const Tensor& frames) const {
  return msm::msm_forward(frames, cfg_.windows(), msm_);
}

TemporalOutputs MsFIN::temporal_process(const Tensor& objects, const std::array<Tensor, 3>& scenes,
                                        const std::vector<std::uint8_t>& valid) const {
  TemporalOutputs out;
  const std::size_t steps = objects.dim(0), n = objects.dim(1);
  // Each object's own time series is an independent batch entry.
  const Tensor per_object = ops::permute(objects, {1, 0, 2});
  auto mask = attn::AttentionMask::causal();
  if (!valid.empty()) {
    if (valid.size() != steps * n) fail(ErrorKind::Dimension, "object mask does not match the object tensor");
    std::vector<std::uint8_t> padded(steps * n);
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t k = 0; k < n; ++k) padded[k * steps + t] = valid[t * n + k] == 0;
    }
    mask = attn::AttentionMask::causal_padding(std::move(padded));
  }
  out.objects = cfg_.switches.ctm ? attn::stack(ctm_object_, per_object, mask, cfg_.attn_norm).out : per_object;
  for (std::size_t p = 0; p < 3; ++p) {
    if (!scenes[p].defined()) continue;
    out.scenes[p] = cfg_.switches.ctm
                        ? attn::stack(ctm_scene_[p], scenes[p], attn::AttentionMask::causal(), cfg_.attn_norm).out
                        : scenes[p];
  }
  return out;
}

PostFusion MsFIN::post_fuse(const TemporalOutputs& temporal,
                            const std::vector<std::uint8_t>& valid) const {
  PostFusion out;
  const std::size_t n = temporal.objects.dim(0), steps = temporal.objects.dim(1), d = cfg_.d;
  if (valid.size() != steps * n) {
    fail(ErrorKind::Dimension, "object mask has " + std::to_string(valid.size()) + " flags for " +
                                   std::to_string(steps) + " x " + std::to_string(n) + " slots");
  }
  const Tensor keys = ops::permute(temporal.objects, {1, 0, 2});  // [T, N, d]
  std::vector<std::uint8_t> padded(valid.size());
  for (std::size_t i = 0; i < padded.size(); ++i) padded[i] = valid[i] == 0;
  const auto mask = attn::AttentionMask::key_padding(padded);
  for (std::size_t p = 0; p < 3; ++p) {
    if (!temporal.scenes[p].defined()) continue;
    if (!cfg_.switches.cam_post) {
      out.fused[p] = temporal.scenes[p];
      continue;
    }
    const Tensor queries = ops::reshape(temporal.scenes[p], {steps, 1, d});
    auto r = attn::cross_stack(cam_post_[p], queries, keys, mask, cfg_.attn_norm);
    out.fused[p] = ops::reshape(r.out, {steps, d});
    out.weights[p] = r.weights;
  }
  return out;
}

Tensor MsFIN::predict_risk(const std::array<Tensor, 3>& fused) const {
  std::vector<Tensor> parts;
  for (const auto& f : fused) {
    if (f.defined()) parts.push_back(f);
  }
  if (parts.size() != cfg_.enabled_scales()) {
    fail(ErrorKind::Dimension, "predict_risk received " + std::to_string(parts.size()) +
                                   " scales, model has " + std::to_string(cfg_.enabled_scales()));
  }
  const Tensor joined = parts.size() == 1 ? parts[0] : ops::concat(parts, -1);
  Tensor h = ops::gelu(ops::add(ops::matmul(joined, mlp_w1_), mlp_b1_));
  h = ops::gelu(ops::add(ops::matmul(h, mlp_w2_), mlp_b2_));
  const Tensor logits = ops::add(ops::matmul(h, mlp_w3_), mlp_b3_);
  return ops::sigmoid(ops::reshape(logits, {joined.dim(0)}));
}

Tensor MsFIN::forward_probs(const SequenceRecord& record, PostFusion* post) const {
  const EmbeddedInputs in = embed_inputs(record);
  const Tensor objects = aggregate_objects(in);
  const auto scenes = aggregate_scenes(in.frames);
  const TemporalOutputs temporal = temporal_process(objects, scenes, in.valid);
  PostFusion fused = post_fuse(temporal, in.valid);
  Tensor probs = predict_risk(fused.fused);
  if (post) *post = std::move(fused);
  return probs;
}

RiskSeries MsFIN::forward(const SequenceRecord& record) const {
  NoGradGuard no_grad;
  PostFusion post;
  const Tensor probs = forward_probs(record, &post);
  RiskSeries out;
  out.probs.assign(probs.data().begin(), probs.data().end());
  out.objects = record.objects;
  // Effective mask (after the no-object substitution) matches the exported weights.
  out.object_mask = record.object_mask;
  for (std::size_t t = 0; t < record.frames; ++t) {
    bool empty = true;
    for (std::size_t k = 0; k < record.objects; ++k) empty = empty && !record.valid(t, k);
    if (empty) out.object_mask[t * record.objects] = 1;
  }
  for (std::size_t p = 0; p < 3; ++p) {
    if (!post.weights[p].defined()) continue;
    const Tensor& w = post.weights[p];  // [T, heads, 1, N]
    ScaleAttention sa;
    sa.scale = static_cast<msm::Scale>(p);
    sa.frames = w.dim(0);
    sa.heads = w.dim(1);
    sa.objects = w.dim(3);
    sa.weights.resize(w.numel());
    auto v = w.data();
    for (std::size_t t = 0; t < sa.frames; ++t) {
      for (std::size_t h = 0; h < sa.heads; ++h) {
        for (std::size_t k = 0; k < sa.objects; ++k) {
          sa.weights[(h * sa.frames + t) * sa.objects + k] = v[(t * sa.heads + h) * sa.objects + k];
        }
      }
    }
    out.attention.push_back(std::move(sa));
  }
  return out;
}

}  // namespace msfin::model
