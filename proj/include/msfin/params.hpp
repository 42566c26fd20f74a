#pragma once

#include <string>
#include <vector>

#include "msfin/gradcheck.hpp"
#include "msfin/rng.hpp"
#include "msfin/tensor.hpp"

namespace msfin {

/// Ordered registry of named learnable tensors. Registration order defines the
/// checkpoint layout and the optimizer's traversal order.
class ParamStore {
 public:
  /// Uniform in +-sqrt(1 / fan_in).
  Tensor add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng);
  Tensor add_constant(const std::string& name, Shape shape, Scalar value);

  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::vector<NamedTensor>& entries() { return entries_; }
  const Tensor* find(const std::string& name) const;
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  Tensor add(const std::string& name, Tensor t);
  std::vector<NamedTensor> entries_;
};

}  // namespace msfin
