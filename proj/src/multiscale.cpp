#include "msfin/multiscale.hpp"

#include "msfin/errors.hpp"
#include "msfin/ops.hpp"

namespace msfin::msm {

std::string to_string(Scale s) {
  switch (s) {
    case Scale::short_term: return "short";
    case Scale::mid_term: return "mid";
    case Scale::long_term: return "long";
  }
  return "?";
}

MultiScaleConfig window_sizes_from_fps(int fps, std::size_t d) {
  if (fps < 1) fail(ErrorKind::Config, "fps must be >= 1, got " + std::to_string(fps));
  // round(fps / 3) with halves rounded up, in integer arithmetic.
  const auto short_window = static_cast<std::size_t>((2 * fps + 3) / 6);
  return {std::max<std::size_t>(1, short_window), static_cast<std::size_t>(fps), d};
}

MsMParams MsMParams::create(ParamStore& store, const std::string& prefix, std::size_t d,
                            bool shared_fusion, Rng& rng, std::array<bool, 3> enabled) {
  MsMParams p;
  p.shared_fusion = shared_fusion;
  p.proj_w = store.add_uniform(prefix + ".proj_w", {d, d}, d, rng);
  p.proj_b = store.add_uniform(prefix + ".proj_b", {d}, d, rng);
  Tensor shared_w, shared_b;
  for (auto s : kAllScales) {
    const auto i = static_cast<std::size_t>(s);
    if (!enabled[i]) continue;
    if (shared_fusion && shared_w.defined()) {
      p.fuse_w[i] = shared_w;
      p.fuse_b[i] = shared_b;
      continue;
    }
    const std::string name = prefix + (shared_fusion ? ".fuse" : ".fuse_" + to_string(s));
    p.fuse_w[i] = shared_w = store.add_uniform(name + "_w", {2 * d, d}, 2 * d, rng);
    p.fuse_b[i] = shared_b = store.add_uniform(name + "_b", {d}, 2 * d, rng);
  }
  return p;
}

PooledScales msm_pool(const Tensor& frames, const MultiScaleConfig& cfg, const MsMParams& params) {
  if (frames.rank() != 2) {
    fail(ErrorKind::Dimension, "frame features must be [T, d], got " + shape_str(frames.shape()));
  }
  const std::size_t steps = frames.dim(0);
  if (cfg.short_window < 1 || cfg.short_window > cfg.mid_window) {
    fail(ErrorKind::Config, "window sizes must satisfy 1 <= short <= mid");
  }
  PooledScales r;
  r.projected = ops::add(ops::matmul(frames, params.proj_w), params.proj_b);
  r.pooled[0] = ops::sliding_window_max(r.projected, cfg.short_window);
  r.pooled[1] = ops::sliding_window_mean(r.projected, cfg.mid_window);
  r.pooled[2] = ops::sliding_window_max(r.projected, steps);
  return r;
}

std::array<Tensor, 3> msm_forward(const Tensor& frames, const MultiScaleConfig& cfg,
                                  const MsMParams& params) {
  if (frames.rank() == 2 && frames.dim(0) == 0) fail(ErrorKind::EmptySequence, "empty frame sequence");
  const PooledScales pooled = msm_pool(frames, cfg, params);
  std::array<Tensor, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!params.fuse_w[i].defined()) continue;
    const Tensor joined = ops::concat({pooled.pooled[i], pooled.projected}, -1);
    out[i] = ops::add(ops::add(ops::matmul(joined, params.fuse_w[i]), params.fuse_b[i]), frames);
  }
  return out;
}

}  // namespace msfin::msm
