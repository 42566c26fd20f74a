#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace msfin {

/// One driving sequence of pre-extracted features.
struct SequenceRecord {
  std::string id;
  std::size_t frames = 0;       // T
  std::size_t objects = 0;      // N
  std::size_t feature_dim = 0;  // d_in
  std::vector<float> frame_features;   // T x d_in
  std::vector<float> object_features;  // T x N x d_in
  std::vector<std::uint8_t> object_mask;  // T x N, 1 = valid slot
  int label = 0;
  std::optional<int> t_ao;  // 1-based accident frame, positives only
  int fps = 1;
  std::string split;  // free-form tag, e.g. "train" / "test"

  /// Throws msfin::Error naming the record id on any invariant violation.
  void validate() const;

  /// First `t` frames. A positive whose accident lies beyond the cut keeps its
  /// label and t_ao so per-frame targets stay comparable; it is not validated.
  SequenceRecord prefix(std::size_t t) const;

  float frame_at(std::size_t t, std::size_t c) const { return frame_features[t * feature_dim + c]; }
  float object_at(std::size_t t, std::size_t n, std::size_t c) const {
    return object_features[(t * objects + n) * feature_dim + c];
  }
  bool valid(std::size_t t, std::size_t n) const { return object_mask[t * objects + n] != 0; }
};

}  // namespace msfin
