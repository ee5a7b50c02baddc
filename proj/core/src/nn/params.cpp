#include "deocclude/nn/params.hpp"

#include "deocclude/error.hpp"

namespace deoc::nn {

Param& ParamRegistry::add(const std::string& name, std::vector<int> shape) {
  if (params_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  Param p;
  p.value = Tensor(shape);
  p.grad = Tensor(shape);
  auto [it, ok] = params_.emplace(name, std::move(p));
  (void)ok;
  return it->second;
}

Param& ParamRegistry::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const Param& ParamRegistry::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

void ParamRegistry::zero_grads() {
  for (auto& [name, p] : params_) p.grad.zero();
}

std::size_t ParamRegistry::total_size() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

}  // namespace deoc::nn
