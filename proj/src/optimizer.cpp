#include "msfin/optimizer.hpp"

#include <cmath>

#include "msfin/errors.hpp"

namespace msfin::optim {

void AdamWConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorKind::Config, "optimizer: " + m); };
  if (!(lr >= 0) || !std::isfinite(lr)) bad("lr must be finite and >= 0");
  if (!(weight_decay >= 0)) bad("weight_decay must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) bad("betas must lie in [0, 1)");
  if (!(eps > 0)) bad("eps must be > 0");
}

nlohmann::json to_json(const AdamWConfig& c) {
  return {{"name", "adamw"},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"betas", {c.beta1, c.beta2}},
          {"eps", c.eps}};
}

AdamWConfig adamw_from_json(const nlohmann::json& j) {
  AdamWConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "name") {
        if (value.get<std::string>() != "adamw") {
          fail(ErrorKind::Config, "optimizer '" + value.get<std::string>() + "' is not supported (adamw only)");
        }
      } else if (key == "lr") {
        c.lr = value.get<double>();
      } else if (key == "weight_decay") {
        c.weight_decay = value.get<double>();
      } else if (key == "betas") {
        if (!value.is_array() || value.size() != 2) fail(ErrorKind::Config, "optimizer.betas must be [b1, b2]");
        c.beta1 = value[0].get<double>();
        c.beta2 = value[1].get<double>();
      } else if (key == "eps") {
        c.eps = value.get<double>();
      } else {
        fail(ErrorKind::Config, "unknown optimizer key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed optimizer config: ") + e.what());
  }
  c.validate();
  return c;
}

AdamW::AdamW(std::vector<NamedTensor> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  cfg_.validate();
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void AdamW::step() {
  ++steps_;
  const double k = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(cfg_.beta1, k);
  const double c2 = 1.0 - std::pow(cfg_.beta2, k);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].tensor;
    auto theta = p.mutable_data();
    const bool has = p.has_grad();
    std::span<const Scalar> g = has ? p.grad() : std::span<const Scalar>();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double gj = has ? g[j] : 0.0;
      theta[j] -= cfg_.lr * cfg_.weight_decay * theta[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
      theta[j] -= cfg_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
    }
  }
}

}  // namespace msfin::optim
