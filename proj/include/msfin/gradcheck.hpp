#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "msfin/tensor.hpp"

namespace msfin {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradientCheckReport {
  double max_relative_error = 0;
  std::map<std::string, double> per_parameter_errors;
  bool passed = false;
};

struct GradientCheckOptions {
  double eps = 1e-4;
  double tolerance = 1e-4;
  /// Upper bound on checked elements per tensor; 0 checks every element.
  /// When bounded, elements are taken at an even stride across the tensor.
  std::size_t max_elements_per_tensor = 0;
};

/// Central-difference check of backward() against `loss`, which must rebuild
/// the graph from the current values of `params` on every call. Relative error
/// is |a - b| / max(|a|, |b|, 1e-8).
GradientCheckReport finite_diff_check(const std::function<Tensor()>& loss,
                                      std::vector<NamedTensor> params,
                                      const GradientCheckOptions& options = {});

}  // namespace msfin
