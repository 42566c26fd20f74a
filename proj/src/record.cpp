#include "msfin/record.hpp"

#include "msfin/errors.hpp"

namespace msfin {

void SequenceRecord::validate() const {
  const std::string who = "record '" + id + "': ";
  if (frames == 0 || objects == 0 || feature_dim == 0) {
    fail(ErrorKind::ShapeInconsistency, who + "T, N and d_in must be positive");
  }
  if (frame_features.size() != frames * feature_dim ||
      object_features.size() != frames * objects * feature_dim ||
      object_mask.size() != frames * objects) {
    fail(ErrorKind::ShapeInconsistency, who + "buffer sizes do not match T x N x d_in");
  }
  if (fps < 1) fail(ErrorKind::ShapeInconsistency, who + "fps must be >= 1");
  if (label != 0 && label != 1) fail(ErrorKind::LabelInconsistent, who + "label must be 0 or 1");
  if (label == 1 && !t_ao) fail(ErrorKind::LabelInconsistent, who + "positive record without t_ao");
  if (label == 0 && t_ao) fail(ErrorKind::LabelInconsistent, who + "negative record carries t_ao");
  if (t_ao && (*t_ao < 1 || static_cast<std::size_t>(*t_ao) > frames)) {
    fail(ErrorKind::TaoOutOfRange,
         who + "t_ao " + std::to_string(*t_ao) + " outside [1, " + std::to_string(frames) + "]");
  }
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t n = 0; n < objects; ++n) {
      if (valid(t, n)) continue;
      for (std::size_t c = 0; c < feature_dim; ++c) {
        if (object_at(t, n, c) != 0.0f) {
          fail(ErrorKind::ShapeInconsistency, who + "padded object slot " + std::to_string(n) +
                                                  " at frame " + std::to_string(t + 1) +
                                                  " is not zero-filled");
        }
      }
    }
  }
}

SequenceRecord SequenceRecord::prefix(std::size_t t) const {
  if (t < 1 || t > frames) {
    fail(ErrorKind::Index, "prefix length " + std::to_string(t) + " outside [1, " +
                               std::to_string(frames) + "]");
  }
  SequenceRecord r = *this;
  r.frames = t;
  r.frame_features.resize(t * feature_dim);
  r.object_features.resize(t * objects * feature_dim);
  r.object_mask.resize(t * objects);
  return r;
}

}  // namespace msfin
