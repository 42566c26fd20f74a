#include "msfin/losses.hpp"

#include <algorithm>
#include <cmath>

#include "msfin/errors.hpp"

namespace msfin::loss {

LossVariant parse_variant(const std::string& s) {
  if (s == "exponential") return LossVariant::exponential;
  if (s == "focal_exponential") return LossVariant::focal_exponential;
  fail(ErrorKind::Config, "unknown loss variant '" + s + "' (expected exponential | focal_exponential)");
}

std::string to_string(LossVariant v) {
  return v == LossVariant::exponential ? "exponential" : "focal_exponential";
}

void LossConfig::validate() const {
  if (!(alpha > 0 && alpha < 1)) fail(ErrorKind::Config, "alpha must lie in (0, 1)");
  if (!(gamma >= 0)) fail(ErrorKind::Config, "gamma must be >= 0");
  if (!(fps >= 1)) fail(ErrorKind::Config, "fps must be >= 1");
}

double decay_weight(double t, double t_ao, double r) {
  return std::exp(-std::max(0.0, (t_ao - t) / r));
}

namespace {

void check_target(const Tensor& probs, const SequenceTarget& target) {
  if (probs.rank() != 1) fail(ErrorKind::Dimension, "loss expects probabilities [T], got " + shape_str(probs.shape()));
  if (target.label != 0 && target.label != 1) fail(ErrorKind::Contract, "label must be 0 or 1");
  if (target.label == 1 && !target.t_ao) fail(ErrorKind::Contract, "positive target without t_ao");
}

// Per-frame value and derivative d(loss_t)/dp of the focal form; the plain
// exponential loss is the alpha-free, gamma = 0 special case.
struct FrameTerm {
  double value, slope;
};

FrameTerm frame_term(double p, double y, double w, double neg_weight, double pos_weight,
                     double gamma) {
  const double lp = std::log(p), l1p = std::log1p(-p);
  double value = 0, slope = 0;
  if (y == 0) {
    const double mod = gamma == 0 ? 1.0 : std::pow(p, gamma);
    const double dmod = gamma == 0 ? 0.0 : gamma * std::pow(p, gamma - 1);
    value = -neg_weight * mod * l1p;
    slope = -neg_weight * (dmod * l1p - mod / (1 - p));
  } else {
    const double mod = gamma == 0 ? 1.0 : std::pow(1 - p, gamma);
    const double dmod = gamma == 0 ? 0.0 : -gamma * std::pow(1 - p, gamma - 1);
    value = -pos_weight * w * mod * lp;
    slope = -pos_weight * w * (dmod * lp + mod / p);
  }
  return {value, slope};
}

Tensor build(const Tensor& probs, const SequenceTarget& target, const LossConfig& cfg,
             double neg_weight, double pos_weight, double gamma) {
  check_target(probs, target);
  auto pv = probs.data();
  const std::size_t steps = pv.size();
  std::vector<Scalar> slopes(steps, 0);
  double total = 0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double raw = pv[i];
    const double p = std::clamp(raw, kProbEps, 1 - kProbEps);
    const double w = target.label == 1
                         ? decay_weight(static_cast<double>(i + 1), *target.t_ao, cfg.fps)
                         : 0.0;
    const FrameTerm term = frame_term(p, target.label, w, neg_weight, pos_weight, gamma);
    total += term.value;
    slopes[i] = (raw > kProbEps && raw < 1 - kProbEps) ? term.slope : 0.0;
  }
  auto pn = probs.node();
  return detail::make_result({1}, {total}, {probs}, [pn, slopes](detail::Node& self) {
    auto& g = pn->grad_buffer();
    for (std::size_t i = 0; i < slopes.size(); ++i) g[i] += self.grad[0] * slopes[i];
  });
}

}  // namespace

Tensor exponential_loss(const Tensor& probs, const SequenceTarget& target, const LossConfig& cfg) {
  return build(probs, target, cfg, 1.0, 1.0, 0.0);
}

Tensor focal_exponential_loss(const Tensor& probs, const SequenceTarget& target,
                              const LossConfig& cfg) {
  return build(probs, target, cfg, cfg.alpha, 1.0 - cfg.alpha, cfg.gamma);
}

Tensor sequence_loss(const Tensor& probs, const SequenceTarget& target, const LossConfig& cfg) {
  return cfg.variant == LossVariant::exponential ? exponential_loss(probs, target, cfg)
                                                 : focal_exponential_loss(probs, target, cfg);
}

}  // namespace msfin::loss
