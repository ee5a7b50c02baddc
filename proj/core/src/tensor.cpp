#include "deocclude/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace deoc {

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<std::size_t>(count(shape_)), 0.0f);
}

std::int64_t Tensor::count(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative tensor dimension");
    n *= d;
  }
  return n;
}

void Tensor::zero() { std::fill(data_.begin(), data_.end(), 0.0f); }

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace deoc
