#include <cmath>

#include "doctest.h"
#include "msfin/errors.hpp"
#include "msfin/gradcheck.hpp"
#include "msfin/losses.hpp"
#include "msfin/ops.hpp"
#include "msfin/rng.hpp"

using namespace msfin;
using loss::LossConfig;
using loss::SequenceTarget;

namespace {

// Direct per-frame evaluation with no shared code path.
double direct_loss(const std::vector<double>& p, int y, int t_ao, double r, double alpha, double gamma, bool focal) {
  double total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double t = static_cast<double>(i + 1);
    const double w = y == 1 ? std::exp(-std::max(0.0, (t_ao - t) / r)) : 0.0;
    if (focal) {
      total -= alpha * std::pow(p[i], gamma) * (1 - y) * std::log(1 - p[i]);
      total -= (1 - alpha) * std::pow(1 - p[i], gamma) * y * w * std::log(p[i]);
    } else {
      total -= (1 - y) * std::log(1 - p[i]) + y * w * std::log(p[i]);
    }
  }
  return total;
}

std::vector<double> random_probs(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  for (auto& v : p) v = 0.01 + 0.98 * rng.uniform();
  return p;
}

double value(const Tensor& t) { return t.data()[0]; }

}  // namespace

TEST_CASE("decay weight") {
  CHECK(loss::decay_weight(40, 40, 20) == 1.0);
  CHECK(loss::decay_weight(20, 40, 20) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(std::abs(loss::decay_weight(20, 40, 20) - 0.36788) < 1e-5);
  CHECK(std::abs(loss::decay_weight(0, 40, 20) - 0.13534) < 1e-5);
  CHECK(loss::decay_weight(55, 40, 20) == 1.0);
  double prev = 0;
  for (int t = 1; t <= 100; ++t) {
    const double w = loss::decay_weight(t, 60, 10);
    CHECK(w >= prev);
    if (t >= 60) CHECK(w == 1.0);
    prev = w;
  }
}

TEST_CASE("exponential loss examples") {
  LossConfig cfg;
  cfg.fps = 20;
  const auto neg = loss::exponential_loss(Tensor::from({10}, std::vector<double>(10, 0.5)), {0, std::nullopt}, cfg);
  CHECK(value(neg) == doctest::Approx(10 * std::log(2.0)).epsilon(1e-12));
  CHECK(std::abs(value(neg) - 6.9315) < 1e-4);
  const auto one = loss::exponential_loss(Tensor::from({1}, {0.5}), {1, 1}, cfg);
  CHECK(value(one) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  cfg.fps = 1;
  const auto two = loss::exponential_loss(Tensor::from({2}, {0.5, 0.5}), {1, 2}, cfg);
  CHECK(value(two) == doctest::Approx(std::exp(-1.0) * std::log(2.0) + std::log(2.0)).epsilon(1e-12));
  CHECK(std::abs(value(two) - 0.9481) < 1e-4);
}

TEST_CASE("focal loss examples") {
  LossConfig cfg;
  cfg.alpha = 0.25;
  cfg.gamma = 2;
  const auto pos = loss::focal_exponential_loss(Tensor::from({1}, {0.9}), {1, 1}, cfg);
  CHECK(value(pos) == doctest::Approx(-0.75 * 0.01 * std::log(0.9)).epsilon(1e-12));
  CHECK(std::abs(value(pos) - 7.9e-4) < 1e-5);
  // Well-classified negatives vanish.
  double prev = INFINITY;
  for (double p : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    const double l = value(loss::focal_exponential_loss(Tensor::from({1}, {p}), {0, std::nullopt}, cfg));
    CHECK(l < prev);
    prev = l;
  }
  CHECK(prev < 1e-14);
}

TEST_CASE("both variants agree with direct evaluation") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto steps = static_cast<std::size_t>(rng.uniform_int(1, 40));
    const auto p = random_probs(rng, steps);
    const int y = static_cast<int>(rng.uniform_int(0, 1));
    const int t_ao = static_cast<int>(rng.uniform_int(1, static_cast<std::int64_t>(steps)));
    LossConfig cfg;
    cfg.fps = static_cast<double>(rng.uniform_int(1, 30));
    cfg.alpha = 0.05 + 0.9 * rng.uniform();
    cfg.gamma = 3 * rng.uniform();
    const SequenceTarget target{y, y == 1 ? std::optional<int>(t_ao) : std::nullopt};
    const auto probs = Tensor::from({steps}, p);
    CHECK(value(loss::exponential_loss(probs, target, cfg)) ==
          doctest::Approx(direct_loss(p, y, t_ao, cfg.fps, 0, 0, false)).epsilon(1e-12));
    CHECK(value(loss::focal_exponential_loss(probs, target, cfg)) ==
          doctest::Approx(direct_loss(p, y, t_ao, cfg.fps, cfg.alpha, cfg.gamma, true)).epsilon(1e-12));
  }
}

TEST_CASE("gamma 0, alpha 0.5 halves the exponential loss") {
  Rng rng(2);
  LossConfig cfg;
  cfg.alpha = 0.5;
  cfg.gamma = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto steps = static_cast<std::size_t>(rng.uniform_int(1, 50));
    const auto probs = Tensor::from({steps}, random_probs(rng, steps));
    const int y = static_cast<int>(rng.uniform_int(0, 1));
    const SequenceTarget target{y, y == 1 ? std::optional<int>(static_cast<int>(steps)) : std::nullopt};
    const double focal = value(loss::focal_exponential_loss(probs, target, cfg));
    const double plain = value(loss::exponential_loss(probs, target, cfg));
    CHECK(std::abs(focal - 0.5 * plain) <= 1e-7);
  }
}

TEST_CASE("clamping keeps the loss finite with zero gradient at the rails") {
  LossConfig cfg;
  auto p = Tensor::from({4}, {0.0, 1.0, 0.5, 1e-9}, true);
  for (int y : {0, 1}) {
    for (auto variant : {loss::LossVariant::exponential, loss::LossVariant::focal_exponential}) {
      cfg.variant = variant;
      p.zero_grad();
      auto l = loss::sequence_loss(p, {y, y == 1 ? std::optional<int>(3) : std::nullopt}, cfg);
      CHECK(std::isfinite(value(l)));
      CHECK(value(l) >= 0);
      backward(l);
      CHECK(p.grad()[0] == 0.0);
      CHECK(p.grad()[1] == 0.0);
      CHECK(p.grad()[3] == 0.0);
      CHECK(p.grad()[2] != 0.0);
    }
  }
}

TEST_CASE("gradient signs and finite differences") {
  Rng rng(3);
  for (int s = 0; s < 20; ++s) {
    const auto steps = static_cast<std::size_t>(rng.uniform_int(2, 12));
    auto p = Tensor::from({steps}, random_probs(rng, steps), true);
    for (int y : {0, 1}) {
      for (auto variant : {loss::LossVariant::exponential, loss::LossVariant::focal_exponential}) {
        LossConfig cfg;
        cfg.variant = variant;
        cfg.fps = 4;
        const SequenceTarget target{y, y == 1 ? std::optional<int>(static_cast<int>(steps)) : std::nullopt};
        GradientCheckOptions opt;
        opt.eps = 1e-6;
        const auto report = finite_diff_check([&] { return loss::sequence_loss(p, target, cfg); }, {{"p", p}}, opt);
        INFO("max relative error " << report.max_relative_error);
        CHECK(report.passed);
        p.zero_grad();
        backward(loss::sequence_loss(p, target, cfg));
        for (double g : p.grad()) {
          if (y == 1) CHECK(g < 0);
          else CHECK(g > 0);
        }
      }
    }
  }
}

TEST_CASE("focal down-weights well-classified frames") {
  for (double gamma : {0.5, 1.0, 2.0, 3.0}) {
    for (int y : {0, 1}) {
      for (double margin : {0.01, 0.05, 0.09}) {
        const double pv = y == 1 ? 1 - margin : margin;
        LossConfig focal_cfg;
        focal_cfg.gamma = gamma;
        LossConfig plain_cfg;
        plain_cfg.variant = loss::LossVariant::exponential;
        const SequenceTarget target{y, y == 1 ? std::optional<int>(1) : std::nullopt};
        auto a = Tensor::from({1}, {pv}, true);
        backward(loss::sequence_loss(a, target, focal_cfg));
        auto b = Tensor::from({1}, {pv}, true);
        backward(loss::sequence_loss(b, target, plain_cfg));
        CHECK(std::abs(a.grad()[0]) < std::abs(b.grad()[0]));
      }
    }
  }
}

TEST_CASE("config validation and target contracts") {
  LossConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.gamma = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.fps = 0.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(loss::parse_variant("exponential") == loss::LossVariant::exponential);
  CHECK(loss::to_string(loss::LossVariant::focal_exponential) == "focal_exponential");
  CHECK_THROWS_AS(loss::parse_variant("hinge"), Error);
  LossConfig ok;
  CHECK_THROWS_AS(loss::exponential_loss(Tensor::from({2}, {0.5, 0.5}), {1, std::nullopt}, ok), Error);
  CHECK_THROWS_AS(loss::exponential_loss(Tensor::from({1, 2}, {0.5, 0.5}), {0, std::nullopt}, ok), Error);
}
