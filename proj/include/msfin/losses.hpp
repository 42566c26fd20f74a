#pragma once

#include <optional>
#include <string>

#include "msfin/tensor.hpp"

namespace msfin::loss {

enum class LossVariant { exponential, focal_exponential };

LossVariant parse_variant(const std::string& s);
std::string to_string(LossVariant v);

struct LossConfig {
  LossVariant variant = LossVariant::focal_exponential;
  double alpha = 0.25;  // weight of the negative term; the positive term gets 1 - alpha
  double gamma = 2.0;
  double fps = 20;      // r

  void validate() const;
};

struct SequenceTarget {
  int label = 0;
  std::optional<int> t_ao;  // 1-based accident frame for positives
};

/// Probabilities are clamped to [kProbEps, 1 - kProbEps] before taking logs;
/// the gradient is zero where clamping is active.
inline constexpr double kProbEps = 1e-7;

/// exp(-max(0, (t_ao - t) / r)), t 1-based.
double decay_weight(double t, double t_ao, double r);

/// -sum_t [(1-y) log(1-p_t) + y w_t log p_t] over a [T] probability tensor.
Tensor exponential_loss(const Tensor& probs, const SequenceTarget& target, const LossConfig& cfg);
/// -sum_t [alpha p_t^gamma (1-y) log(1-p_t) + (1-alpha)(1-p_t)^gamma y w_t log p_t].
Tensor focal_exponential_loss(const Tensor& probs, const SequenceTarget& target,
                              const LossConfig& cfg);
/// Dispatches on cfg.variant.
Tensor sequence_loss(const Tensor& probs, const SequenceTarget& target, const LossConfig& cfg);

}  // namespace msfin::loss
