#pragma once

#include <map>
#include <string>
#include <vector>

#include "deocclude/tensor.hpp"

namespace deoc::nn {

/// One named parameter array with its gradient accumulator.
struct Param {
  Tensor value;
  Tensor grad;
};

/// Flat name -> parameter map shared by a network and its optimizer.
/// std::map keeps iteration in lexicographic name order, which fixes the
/// accumulation and serialization order.
class ParamRegistry {
 public:
  /// Registers a zero-initialized parameter. Throws on duplicate names.
  Param& add(const std::string& name, std::vector<int> shape);

  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) != 0; }

  std::map<std::string, Param>& all() { return params_; }
  const std::map<std::string, Param>& all() const { return params_; }

  void zero_grads();
  std::size_t total_size() const;

 private:
  std::map<std::string, Param> params_;
};

}  // namespace deoc::nn
