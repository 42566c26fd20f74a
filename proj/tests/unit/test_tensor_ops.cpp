#include <cmath>

#include "doctest.h"
#include "msfin/errors.hpp"
#include "msfin/ops.hpp"
#include "test_util.hpp"

using namespace msfin;
using testutil::random_tensor;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an msfin::Error");
  return ErrorKind::Contract;
}

}  // namespace

TEST_CASE("tensor construction keeps numel and data length in step") {
  auto t = Tensor::zeros({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.data().size() == 24);
  CHECK(t.dim(-1) == 4);
  CHECK(kind_of([] { Tensor::zeros({2, 0}); }) == ErrorKind::Dimension);
  CHECK(kind_of([] { Tensor::from({2, 2}, {1, 2, 3}); }) == ErrorKind::Dimension);
}

TEST_CASE("matmul: identity and hand arithmetic") {
  Rng rng(1);
  auto a = random_tensor({2, 2}, rng);
  auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  auto r = ops::matmul(eye, a);
  CHECK(testutil::bit_equal(r.data(), a.data()));

  auto m = Tensor::from({2, 2}, {1, 2, 3, 4});
  auto ones = Tensor::from({2, 1}, {1, 1});
  auto p = ops::matmul(m, ones);
  CHECK(p.shape() == Shape{2, 1});
  CHECK(p.data()[0] == 3.0);
  CHECK(p.data()[1] == 7.0);
}

TEST_CASE("matmul: shape errors name both shapes") {
  auto a = Tensor::zeros({3, 4});
  auto b = Tensor::zeros({3, 2});
  try {
    ops::matmul(a, b);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Dimension);
    const std::string msg = e.what();
    CHECK(msg.find(shape_str(a.shape())) != std::string::npos);
    CHECK(msg.find(shape_str(b.shape())) != std::string::npos);
  }
}

TEST_CASE("matmul: batched product matches per-matrix loops") {
  Rng rng(2);
  auto a = random_tensor({3, 2, 4}, rng);
  auto b = random_tensor({3, 4, 5}, rng);
  auto shared = random_tensor({4, 5}, rng);
  auto r = ops::matmul(a, b);
  auto rs = ops::matmul(a, shared);
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        double acc = 0, acc_s = 0;
        for (std::size_t k = 0; k < 4; ++k) {
          acc += a.data()[(n * 2 + i) * 4 + k] * b.data()[(n * 4 + k) * 5 + j];
          acc_s += a.data()[(n * 2 + i) * 4 + k] * shared.data()[k * 5 + j];
        }
        CHECK(r.data()[(n * 2 + i) * 5 + j] == doctest::Approx(acc).epsilon(1e-12));
        CHECK(rs.data()[(n * 2 + i) * 5 + j] == doctest::Approx(acc_s).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("softmax: symmetry, stability and unit row sums") {
  auto s = ops::softmax(Tensor::from({2}, {0, 0}), -1);
  CHECK(s.data()[0] == 0.5);
  CHECK(s.data()[1] == 0.5);

  auto big = ops::softmax(Tensor::from({2}, {1000, 0}), -1);
  CHECK(std::abs(big.data()[0] - 1.0) < 1e-6);
  CHECK(std::abs(big.data()[1]) < 1e-6);

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_tensor({4, 7}, rng, false, 1e4);
    auto y = ops::softmax(x, -1);
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 7; ++c) {
        CHECK(y.data()[r * 7 + c] >= 0.0);
        total += y.data()[r * 7 + c];
      }
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("softmax along a leading axis") {
  auto x = Tensor::from({2, 2}, {0, 1, 0, 3});
  auto y = ops::softmax(x, 0);
  CHECK(y.data()[0] == doctest::Approx(0.5));
  CHECK(y.data()[1] == doctest::Approx(1.0 / (1.0 + std::exp(2.0))));
}

TEST_CASE("masked softmax zeroes masked entries and rejects empty rows") {
  auto allowed = std::make_shared<const std::vector<std::uint8_t>>(std::vector<std::uint8_t>{1, 0, 1});
  auto y = ops::masked_softmax(Tensor::from({3}, {0.3, 50, 0.3}), allowed);
  CHECK(y.data()[1] == 0.0);
  CHECK(y.data()[0] == doctest::Approx(0.5));
  auto none = std::make_shared<const std::vector<std::uint8_t>>(std::vector<std::uint8_t>{0, 0, 0});
  CHECK(kind_of([&] { ops::masked_softmax(Tensor::from({3}, {1, 2, 3}), none); }) == ErrorKind::MaskedRow);
}

TEST_CASE("layer_norm: constant and hand-computed vectors") {
  auto gain = Tensor::full({3}, 1.0);
  auto bias = Tensor::zeros({3});
  auto z = ops::layer_norm(Tensor::from({3}, {4, 4, 4}), gain, bias);
  for (double v : z.data()) CHECK(v == 0.0);

  auto y = ops::layer_norm(Tensor::from({3}, {1, 2, 3}), gain, bias);
  CHECK(y.data()[0] == doctest::Approx(-1.2247).epsilon(1e-3));
  CHECK(y.data()[1] == doctest::Approx(0.0));
  CHECK(y.data()[2] == doctest::Approx(1.2247).epsilon(1e-3));

  Rng rng(4);
  auto x = random_tensor({5, 8}, rng, false, 3.0);
  auto n = ops::layer_norm(x, Tensor::full({8}, 1.0), Tensor::zeros({8}));
  for (std::size_t r = 0; r < 5; ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < 8; ++c) mean += n.data()[r * 8 + c];
    mean /= 8;
    for (std::size_t c = 0; c < 8; ++c) var += std::pow(n.data()[r * 8 + c] - mean, 2);
    var /= 8;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-5);
  }
}

TEST_CASE("gelu: exact Gaussian CDF form") {
  auto y = ops::gelu(Tensor::from({4}, {0, 10, -10, 1}));
  CHECK(y.data()[0] == 0.0);
  CHECK(std::abs(y.data()[1] - 10.0) < 1e-6);
  CHECK(std::abs(y.data()[2]) < 1e-6);
  // 1 * Phi(1) with Phi from erf; the tanh approximation differs at 1e-4.
  CHECK(y.data()[3] == doctest::Approx(0.5 * (1 + std::erf(1 / std::sqrt(2.0)))).epsilon(1e-14));
  double prev = -1e9;
  for (double x = -0.75; x <= 6; x += 0.05) {
    double v = ops::gelu(Tensor::scalar(x)).item();
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("window reductions: definition and clipping") {
  auto x = Tensor::from({4, 1}, {1, 3, 2, 5});
  CHECK(ops::window_max(x, 4, 2).item() == 5.0);
  CHECK(ops::window_mean(x, 4, 2).item() == 3.5);
  CHECK(ops::window_max(x, 1, 3).item() == 1.0);
  CHECK(ops::window_mean(x, 1, 3).item() == 1.0);
  CHECK(kind_of([&] { ops::window_max(x, 0, 2); }) == ErrorKind::Index);
  CHECK(kind_of([&] { ops::window_mean(x, 5, 2); }) == ErrorKind::Index);
}

TEST_CASE("window reductions equal a brute-force scan for every t") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t steps = 1 + static_cast<std::size_t>(rng.uniform_int(0, 31));
    const std::size_t d = 1 + static_cast<std::size_t>(rng.uniform_int(0, 4));
    const std::size_t w = 1 + static_cast<std::size_t>(rng.uniform_int(0, 9));
    auto x = random_tensor({steps, d}, rng);
    auto smax = ops::sliding_window_max(x, w);
    auto smean = ops::sliding_window_mean(x, w);
    for (std::size_t t = 1; t <= steps; ++t) {
      const std::size_t lo = t > w ? t - w + 1 : 1;
      auto wm = ops::window_max(x, t, w);
      auto wa = ops::window_mean(x, t, w);
      for (std::size_t c = 0; c < d; ++c) {
        double best = -INFINITY, total = 0;
        for (std::size_t u = lo; u <= t; ++u) {
          best = std::max(best, x.data()[(u - 1) * d + c]);
          total += x.data()[(u - 1) * d + c];
        }
        const double mean = total / static_cast<double>(t - lo + 1);
        CHECK(wm.data()[c] == best);
        CHECK(smax.data()[(t - 1) * d + c] == best);
        CHECK(wa.data()[c] == doctest::Approx(mean).epsilon(1e-14));
        CHECK(smean.data()[(t - 1) * d + c] == doctest::Approx(mean).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("window max routes gradient to the earliest argmax") {
  auto x = Tensor::from({4, 1}, {5, 1, 5, 2}, true);
  backward(ops::sum(ops::window_max(x, 4, 4)));
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[2] == 0.0);
}

TEST_CASE("backward: sum gives ones, scalar seed is 1, disconnected stays zero") {
  auto p = Tensor::from({3}, {1, 2, 3}, true);
  auto other = Tensor::from({2}, {1, 1}, true);
  other.zero_grad();
  auto loss = ops::sum(p);
  backward(loss);
  for (double g : p.grad()) CHECK(g == 1.0);
  CHECK(loss.grad()[0] == 1.0);
  for (double g : other.grad()) CHECK(g == 0.0);
}

TEST_CASE("backward: non-scalar loss is a contract error") {
  auto p = Tensor::from({3}, {1, 2, 3}, true);
  CHECK(kind_of([&] { backward(ops::scale(p, 2.0)); }) == ErrorKind::Contract);
}

TEST_CASE("backward accumulates across calls until zero_grad") {
  auto p = Tensor::from({2}, {1, 2}, true);
  backward(ops::sum(p));
  backward(ops::sum(p));
  CHECK(p.grad()[0] == 2.0);
  p.zero_grad();
  CHECK(p.grad()[0] == 0.0);
}

TEST_CASE("shared subexpressions accumulate like a duplicated subgraph") {
  Rng rng(6);
  auto w = random_tensor({3, 3}, rng, true);
  auto x = random_tensor({2, 3}, rng);
  // Shared: h used twice.
  auto h = ops::gelu(ops::matmul(x, w));
  backward(ops::sum(ops::mul(h, h)));
  std::vector<double> shared(w.grad().begin(), w.grad().end());
  // Duplicated: the same expression built twice from scratch.
  w.zero_grad();
  auto h1 = ops::gelu(ops::matmul(x, w));
  auto h2 = ops::gelu(ops::matmul(x, w));
  backward(ops::sum(ops::mul(h1, h2)));
  CHECK(testutil::max_abs_diff(shared, w.grad()) < 1e-12);
}

TEST_CASE("no-grad guard records no graph") {
  auto p = Tensor::from({2}, {1, 2}, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = ops::scale(p, 3.0);
  }
  CHECK_FALSE(y.requires_grad());
  CHECK(grad_enabled());
}

TEST_CASE("layout ops: permute, reshape, concat, slice") {
  auto x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto t = ops::transpose(x);
  CHECK(t.shape() == Shape{3, 2});
  CHECK(t.data()[1] == 4.0);
  auto p = ops::permute(Tensor::from({1, 2, 3}, {1, 2, 3, 4, 5, 6}), {2, 0, 1});
  CHECK(p.shape() == Shape{3, 1, 2});
  CHECK(p.data()[1] == 4.0);
  auto r = ops::reshape(x, {3, 2});
  CHECK(r.data()[5] == 6.0);
  auto c = ops::concat({x, x}, 1);
  CHECK(c.shape() == Shape{2, 6});
  CHECK(c.data()[3] == 1.0);
  auto s = ops::slice(x, 1, 1, 2);
  CHECK(s.shape() == Shape{2, 2});
  CHECK(s.data()[2] == 5.0);
  CHECK(kind_of([&] { ops::reshape(x, {4, 2}); }) == ErrorKind::Dimension);
}

TEST_CASE("broadcast add over leading axes") {
  auto x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto b = Tensor::from({3}, {10, 20, 30}, true);
  auto y = ops::add(x, b);
  CHECK(y.data()[4] == 25.0);
  backward(ops::sum(y));
  CHECK(b.grad()[0] == 2.0);
  CHECK(kind_of([&] { ops::add(x, Tensor::zeros({2})); }) == ErrorKind::Dimension);
}
