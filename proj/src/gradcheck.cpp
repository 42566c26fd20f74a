#include "msfin/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace msfin {

GradientCheckReport finite_diff_check(const std::function<Tensor()>& loss,
                                      std::vector<NamedTensor> params,
                                      const GradientCheckOptions& options) {
  for (auto& p : params) p.tensor.zero_grad();
  backward(loss());

  GradientCheckReport report;
  // Perturbed evaluations need values only.
  NoGradGuard no_grad;
  for (auto& p : params) {
    const std::vector<Scalar> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
    auto values = p.tensor.mutable_data();
    const std::size_t n = values.size();
    std::size_t stride = 1;
    if (options.max_elements_per_tensor > 0 && n > options.max_elements_per_tensor) {
      stride = (n + options.max_elements_per_tensor - 1) / options.max_elements_per_tensor;
    }
    double worst = 0;
    for (std::size_t i = 0; i < n; i += stride) {
      const Scalar saved = values[i];
      values[i] = saved + options.eps;
      const Scalar up = loss().item();
      values[i] = saved - options.eps;
      const Scalar down = loss().item();
      values[i] = saved;
      const double numeric = (up - down) / (2 * options.eps);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    report.per_parameter_errors[p.name] = worst;
    report.max_relative_error = std::max(report.max_relative_error, worst);
  }
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

}  // namespace msfin
