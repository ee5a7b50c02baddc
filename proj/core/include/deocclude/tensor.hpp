#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace deoc {

/// Dense row-major float tensor. Feature maps use (C, H, W) order throughout
/// the network code.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

  static std::int64_t count(const std::vector<int>& shape);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& vec() { return data_; }
  const std::vector<float>& vec() const { return data_; }

  float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  /// (C, H, W) accessor for rank-3 tensors.
  float& at(int c, int h, int w) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }
  float at(int c, int h, int w) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  void zero();
  bool all_finite() const;

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

}  // namespace deoc
