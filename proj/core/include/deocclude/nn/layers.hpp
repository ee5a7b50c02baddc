#pragma once

#include <string>

#include "deocclude/nn/params.hpp"
#include "deocclude/rng.hpp"
#include "deocclude/tensor.hpp"

namespace deoc::nn {

/// 2-D convolution over (C, H, W) tensors, im2col + GEMM.
///
/// backward(dy, param_grads, input_grad) accumulates into the registered
/// gradient buffers when param_grads is set and returns d(input) when
/// input_grad is set (an empty tensor otherwise).
class Conv2d {
 public:
  Conv2d(ParamRegistry& reg, const std::string& name, int in_ch, int out_ch, int ksize,
         int stride, int pad, bool bias);

  void init(Rng& rng);
  void init_zero();

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy, bool param_grads, bool input_grad = true);

  int out_height(int h) const { return (h + 2 * pad_ - ksize_) / stride_ + 1; }
  int out_width(int w) const { return (w + 2 * pad_ - ksize_) / stride_ + 1; }
  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }

 private:
  void im2col(const Tensor& x, std::vector<float>& col, int ho, int wo) const;
  void col2im(const std::vector<float>& col, Tensor& dx, int ho, int wo) const;

  int in_ch_, out_ch_, ksize_, stride_, pad_;
  bool has_bias_;
  Param* weight_;
  Param* bias_ = nullptr;
  Tensor input_;  // cached for backward
};

/// Per-channel normalization over the spatial extent with learned
/// scale/shift. Statistics are per sample (no batch coupling).
class InstanceNorm {
 public:
  InstanceNorm(ParamRegistry& reg, const std::string& name, int channels);

  void init();
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy, bool param_grads);

 private:
  int channels_;
  Param* gamma_;
  Param* beta_;
  Tensor xhat_;
  std::vector<float> inv_std_;
};

class LeakyReLU {
 public:
  explicit LeakyReLU(float slope = 0.2f) : slope_(slope) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy) const;

 private:
  float slope_;
  Tensor input_;
};

/// Nearest-neighbor 2x upsample.
class Upsample2x {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy) const;

 private:
  std::vector<int> in_shape_;
};

class Linear {
 public:
  Linear(ParamRegistry& reg, const std::string& name, int in_dim, int out_dim);

  void init(Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy, bool param_grads, bool input_grad = true);

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }

 private:
  int in_dim_, out_dim_;
  Param* weight_;
  Param* bias_;
  Tensor input_;
};

/// (C, H, W) -> (C,) mean over the spatial extent.
class GlobalAvgPool {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy) const;

 private:
  std::vector<int> in_shape_;
};

/// y = (tanh(x) + 1) / 2, mapping onto [0, 1].
Tensor tanh01_forward(const Tensor& x);
Tensor tanh01_backward(const Tensor& y, const Tensor& dy);

/// He-normal fill used by conv/linear weight init.
void fill_he_normal(Tensor& t, int fan_in, Rng& rng);

}  // namespace deoc::nn
