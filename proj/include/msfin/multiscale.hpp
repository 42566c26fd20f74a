#pragma once

#include <array>
#include <string>

#include "msfin/params.hpp"
#include "msfin/tensor.hpp"

namespace msfin::msm {

enum class Scale { short_term = 0, mid_term = 1, long_term = 2 };
inline constexpr std::array<Scale, 3> kAllScales{Scale::short_term, Scale::mid_term, Scale::long_term};
std::string to_string(Scale s);

struct MultiScaleConfig {
  std::size_t short_window = 1;
  std::size_t mid_window = 1;
  std::size_t d = 0;
};

/// short = max(1, round_half_up(fps / 3)), mid = fps.
MultiScaleConfig window_sizes_from_fps(int fps, std::size_t d = 0);

/// Input projection plus one fusion layer per scale. With `shared_fusion`
/// all three scales alias the same fusion tensors.
struct MsMParams {
  Tensor proj_w, proj_b;            // d x d, d
  std::array<Tensor, 3> fuse_w;     // 2d x d
  std::array<Tensor, 3> fuse_b;     // d
  bool shared_fusion = false;

  /// Scales switched off in `enabled` get no fusion parameters.
  static MsMParams create(ParamStore& store, const std::string& prefix, std::size_t d,
                          bool shared_fusion, Rng& rng,
                          std::array<bool, 3> enabled = {true, true, true});
};

struct PooledScales {
  Tensor projected;  // f'_t for every t, [T, d]
  std::array<Tensor, 3> pooled;
};

/// Projection and the three causal poolings, before fusion.
PooledScales msm_pool(const Tensor& frames, const MultiScaleConfig& cfg, const MsMParams& params);

/// Fused per-scale scene features, each [T, d]:
/// fused_p = concat(pooled_p, f') W_p + B_p + frames. Scales without fusion
/// parameters yield an undefined tensor.
std::array<Tensor, 3> msm_forward(const Tensor& frames, const MultiScaleConfig& cfg,
                                  const MsMParams& params);

}  // namespace msfin::msm
