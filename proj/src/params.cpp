#include "msfin/params.hpp"

#include <cmath>

#include "msfin/errors.hpp"

namespace msfin {

Tensor ParamStore::add(const std::string& name, Tensor t) {
  if (find(name)) fail(ErrorKind::Contract, "duplicate parameter name " + name);
  entries_.push_back({name, t});
  return t;
}

Tensor ParamStore::add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::vector<Scalar> values(shape_numel(shape));
  for (auto& v : values) v = rng.uniform(-bound, bound);
  return add(name, Tensor::from(std::move(shape), std::move(values), true));
}

Tensor ParamStore::add_constant(const std::string& name, Shape shape, Scalar value) {
  return add(name, Tensor::full(std::move(shape), value, true));
}

const Tensor* ParamStore::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e.tensor;
  }
  return nullptr;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

}  // namespace msfin
