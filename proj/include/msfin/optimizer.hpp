#pragma once

#include <vector>

#include "json.hpp"
#include "msfin/gradcheck.hpp"

namespace msfin::optim {

struct AdamWConfig {
  double lr = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

nlohmann::json to_json(const AdamWConfig& c);
/// Accepts {"name": "adamw", "lr", "weight_decay", "betas": [b1, b2], "eps"}.
AdamWConfig adamw_from_json(const nlohmann::json& j);

/// Decoupled weight decay (Loshchilov & Hutter):
///   theta <- theta - lr * wd * theta
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr * (m / (1 - b1^k)) / (sqrt(v / (1 - b2^k)) + eps)
class AdamW {
 public:
  AdamW(std::vector<NamedTensor> params, AdamWConfig cfg);

  /// One update from the accumulated gradients; a missing gradient counts as zero.
  void step();
  std::size_t steps() const { return steps_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  std::vector<NamedTensor> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t steps_ = 0;
};

}  // namespace msfin::optim
