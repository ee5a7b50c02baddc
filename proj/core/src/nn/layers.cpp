#include "deocclude/nn/layers.hpp"

#include <cmath>
#include <cstring>

#include <Eigen/Core>

#include "deocclude/error.hpp"

namespace deoc::nn {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void fill_he_normal(Tensor& t, int fan_in, Rng& rng) {
  const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = stddev * static_cast<float>(rng.gaussian());
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(ParamRegistry& reg, const std::string& name, int in_ch, int out_ch, int ksize,
               int stride, int pad, bool bias)
    : in_ch_(in_ch), out_ch_(out_ch), ksize_(ksize), stride_(stride), pad_(pad), has_bias_(bias) {
  weight_ = &reg.add(name + ".w", {out_ch, in_ch, ksize, ksize});
  if (bias) bias_ = &reg.add(name + ".b", {out_ch});
}

void Conv2d::init(Rng& rng) {
  fill_he_normal(weight_->value, in_ch_ * ksize_ * ksize_, rng);
  if (bias_) bias_->value.zero();
}

void Conv2d::init_zero() {
  weight_->value.zero();
  if (bias_) bias_->value.zero();
}

void Conv2d::im2col(const Tensor& x, std::vector<float>& col, int ho, int wo) const {
  const int h = x.dim(1), w = x.dim(2);
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  col.assign(static_cast<std::size_t>(in_ch_) * ksize_ * ksize_ * plane, 0.0f);
  for (int c = 0; c < in_ch_; ++c) {
    const float* xc = x.data() + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < ksize_; ++ky) {
      for (int kx = 0; kx < ksize_; ++kx) {
        float* row = col.data() + ((static_cast<std::size_t>(c) * ksize_ + ky) * ksize_ + kx) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride_ + ky - pad_;
          if (iy < 0 || iy >= h) continue;
          float* dst = row + static_cast<std::size_t>(oy) * wo;
          const float* src = xc + static_cast<std::size_t>(iy) * w;
          if (stride_ == 1) {
            const int ox0 = std::max(0, pad_ - kx);
            const int ox1 = std::min(wo, w + pad_ - kx);
            if (ox1 > ox0)
              std::memcpy(dst + ox0, src + ox0 + kx - pad_,
                          static_cast<std::size_t>(ox1 - ox0) * sizeof(float));
          } else {
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ + kx - pad_;
              if (ix >= 0 && ix < w) dst[ox] = src[ix];
            }
          }
        }
      }
    }
  }
}

void Conv2d::col2im(const std::vector<float>& col, Tensor& dx, int ho, int wo) const {
  const int h = dx.dim(1), w = dx.dim(2);
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < in_ch_; ++c) {
    float* xc = dx.data() + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < ksize_; ++ky) {
      for (int kx = 0; kx < ksize_; ++kx) {
        const float* row =
            col.data() + ((static_cast<std::size_t>(c) * ksize_ + ky) * ksize_ + kx) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride_ + ky - pad_;
          if (iy < 0 || iy >= h) continue;
          const float* src = row + static_cast<std::size_t>(oy) * wo;
          float* dst = xc + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride_ + kx - pad_;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.rank() != 3 || x.dim(0) != in_ch_)
    throw ShapeError("conv " + std::to_string(in_ch_) + "ch expected, got rank " +
                     std::to_string(x.rank()) + " with " +
                     std::to_string(x.rank() > 0 ? x.dim(0) : 0) + "ch");
  input_ = x;
  const int ho = out_height(x.dim(1));
  const int wo = out_width(x.dim(2));
  if (ho <= 0 || wo <= 0) throw ShapeError("conv input too small");

  std::vector<float> col;
  im2col(x, col, ho, wo);
  const int krows = in_ch_ * ksize_ * ksize_;
  Tensor y({out_ch_, ho, wo});
  CMapMat wm(weight_->value.data(), out_ch_, krows);
  CMapMat cm(col.data(), krows, ho * wo);
  MapMat ym(y.data(), out_ch_, ho * wo);
  ym.noalias() = wm * cm;
  if (bias_) {
    for (int o = 0; o < out_ch_; ++o)
      ym.row(o).array() += bias_->value[o];
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& dy, bool param_grads, bool input_grad) {
  const int ho = dy.dim(1), wo = dy.dim(2);
  const int krows = in_ch_ * ksize_ * ksize_;
  CMapMat dym(dy.data(), out_ch_, ho * wo);

  if (param_grads) {
    std::vector<float> col;
    im2col(input_, col, ho, wo);
    CMapMat cm(col.data(), krows, ho * wo);
    MapMat dwm(weight_->grad.data(), out_ch_, krows);
    dwm.noalias() += dym * cm.transpose();
    if (bias_) {
      for (int o = 0; o < out_ch_; ++o) bias_->grad[o] += dym.row(o).sum();
    }
  }

  if (!input_grad) return Tensor();
  std::vector<float> dcol(static_cast<std::size_t>(krows) * ho * wo);
  CMapMat wm(weight_->value.data(), out_ch_, krows);
  MapMat dcm(dcol.data(), krows, ho * wo);
  dcm.noalias() = wm.transpose() * dym;
  Tensor dx(input_.shape());
  col2im(dcol, dx, ho, wo);
  return dx;
}

// ---------------------------------------------------------------------------
// InstanceNorm

namespace {
constexpr float kNormEps = 1e-5f;
}

InstanceNorm::InstanceNorm(ParamRegistry& reg, const std::string& name, int channels)
    : channels_(channels) {
  gamma_ = &reg.add(name + ".gamma", {channels});
  beta_ = &reg.add(name + ".beta", {channels});
}

void InstanceNorm::init() {
  for (std::int64_t i = 0; i < gamma_->value.size(); ++i) gamma_->value[i] = 1.0f;
  beta_->value.zero();
}

Tensor InstanceNorm::forward(const Tensor& x) {
  if (x.dim(0) != channels_) throw ShapeError("instance norm channel mismatch");
  const int n = x.dim(1) * x.dim(2);
  Tensor y(x.shape());
  xhat_ = Tensor(x.shape());
  inv_std_.assign(channels_, 0.0f);
  for (int c = 0; c < channels_; ++c) {
    const float* xc = x.data() + static_cast<std::size_t>(c) * n;
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += xc[i];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = xc[i] - mean;
      var += d * d;
    }
    var /= n;
    const float istd = 1.0f / std::sqrt(static_cast<float>(var) + kNormEps);
    inv_std_[c] = istd;
    const float g = gamma_->value[c], b = beta_->value[c];
    float* hc = xhat_.data() + static_cast<std::size_t>(c) * n;
    float* yc = y.data() + static_cast<std::size_t>(c) * n;
    const float m = static_cast<float>(mean);
    for (int i = 0; i < n; ++i) {
      const float h = (xc[i] - m) * istd;
      hc[i] = h;
      yc[i] = g * h + b;
    }
  }
  return y;
}

Tensor InstanceNorm::backward(const Tensor& dy, bool param_grads) {
  const int n = dy.dim(1) * dy.dim(2);
  Tensor dx(dy.shape());
  for (int c = 0; c < channels_; ++c) {
    const float* dyc = dy.data() + static_cast<std::size_t>(c) * n;
    const float* hc = xhat_.data() + static_cast<std::size_t>(c) * n;
    float* dxc = dx.data() + static_cast<std::size_t>(c) * n;
    double sum_dy = 0.0, sum_dyh = 0.0;
    for (int i = 0; i < n; ++i) {
      sum_dy += dyc[i];
      sum_dyh += static_cast<double>(dyc[i]) * hc[i];
    }
    if (param_grads) {
      gamma_->grad[c] += static_cast<float>(sum_dyh);
      beta_->grad[c] += static_cast<float>(sum_dy);
    }
    const float g = gamma_->value[c];
    const float istd = inv_std_[c];
    const float mean_dy = static_cast<float>(sum_dy / n);
    const float mean_dyh = static_cast<float>(sum_dyh / n);
    for (int i = 0; i < n; ++i)
      dxc[i] = g * istd * (dyc[i] - mean_dy - hc[i] * mean_dyh);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// LeakyReLU

Tensor LeakyReLU::forward(const Tensor& x) {
  input_ = x;
  Tensor y(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const float v = x[i];
    y[i] = v > 0.0f ? v : slope_ * v;
  }
  return y;
}

Tensor LeakyReLU::backward(const Tensor& dy) const {
  Tensor dx(dy.shape());
  for (std::int64_t i = 0; i < dy.size(); ++i)
    dx[i] = input_[i] > 0.0f ? dy[i] : slope_ * dy[i];
  return dx;
}

// ---------------------------------------------------------------------------
// Upsample2x

Tensor Upsample2x::forward(const Tensor& x) {
  in_shape_ = x.shape();
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y({c, h * 2, w * 2});
  for (int ch = 0; ch < c; ++ch) {
    for (int yx = 0; yx < h; ++yx) {
      const float* src = x.data() + (static_cast<std::size_t>(ch) * h + yx) * w;
      float* d0 = y.data() + (static_cast<std::size_t>(ch) * h * 2 + yx * 2) * (w * 2);
      float* d1 = d0 + w * 2;
      for (int xx = 0; xx < w; ++xx) {
        const float v = src[xx];
        d0[2 * xx] = v;
        d0[2 * xx + 1] = v;
        d1[2 * xx] = v;
        d1[2 * xx + 1] = v;
      }
    }
  }
  return y;
}

Tensor Upsample2x::backward(const Tensor& dy) const {
  const int c = in_shape_[0], h = in_shape_[1], w = in_shape_[2];
  Tensor dx(in_shape_);
  for (int ch = 0; ch < c; ++ch) {
    for (int yx = 0; yx < h; ++yx) {
      float* dst = dx.data() + (static_cast<std::size_t>(ch) * h + yx) * w;
      const float* s0 = dy.data() + (static_cast<std::size_t>(ch) * h * 2 + yx * 2) * (w * 2);
      const float* s1 = s0 + w * 2;
      for (int xx = 0; xx < w; ++xx)
        dst[xx] = s0[2 * xx] + s0[2 * xx + 1] + s1[2 * xx] + s1[2 * xx + 1];
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(ParamRegistry& reg, const std::string& name, int in_dim, int out_dim)
    : in_dim_(in_dim), out_dim_(out_dim) {
  weight_ = &reg.add(name + ".w", {out_dim, in_dim});
  bias_ = &reg.add(name + ".b", {out_dim});
}

void Linear::init(Rng& rng) {
  fill_he_normal(weight_->value, in_dim_, rng);
  bias_->value.zero();
}

Tensor Linear::forward(const Tensor& x) {
  if (x.size() != in_dim_) throw ShapeError("linear input size mismatch");
  input_ = x;
  Tensor y({out_dim_});
  CMapMat wm(weight_->value.data(), out_dim_, in_dim_);
  Eigen::Map<const Eigen::VectorXf> xv(x.data(), in_dim_);
  Eigen::Map<Eigen::VectorXf> yv(y.data(), out_dim_);
  yv.noalias() = wm * xv;
  for (int o = 0; o < out_dim_; ++o) y[o] += bias_->value[o];
  return y;
}

Tensor Linear::backward(const Tensor& dy, bool param_grads, bool input_grad) {
  Eigen::Map<const Eigen::VectorXf> dyv(dy.data(), out_dim_);
  if (param_grads) {
    MapMat dwm(weight_->grad.data(), out_dim_, in_dim_);
    Eigen::Map<const Eigen::VectorXf> xv(input_.data(), in_dim_);
    dwm.noalias() += dyv * xv.transpose();
    for (int o = 0; o < out_dim_; ++o) bias_->grad[o] += dy[o];
  }
  if (!input_grad) return Tensor();
  Tensor dx(input_.shape());
  CMapMat wm(weight_->value.data(), out_dim_, in_dim_);
  Eigen::Map<Eigen::VectorXf> dxv(dx.data(), in_dim_);
  dxv.noalias() = wm.transpose() * dyv;
  return dx;
}

// ---------------------------------------------------------------------------
// GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x) {
  in_shape_ = x.shape();
  const int c = x.dim(0), n = x.dim(1) * x.dim(2);
  Tensor y({c});
  for (int ch = 0; ch < c; ++ch) {
    const float* xc = x.data() + static_cast<std::size_t>(ch) * n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += xc[i];
    y[ch] = static_cast<float>(s / n);
  }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) const {
  const int c = in_shape_[0], n = in_shape_[1] * in_shape_[2];
  Tensor dx(in_shape_);
  for (int ch = 0; ch < c; ++ch) {
    const float g = dy[ch] / static_cast<float>(n);
    float* dxc = dx.data() + static_cast<std::size_t>(ch) * n;
    for (int i = 0; i < n; ++i) dxc[i] = g;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// tanh01

Tensor tanh01_forward(const Tensor& x) {
  Tensor y(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i)
    y[i] = (std::tanh(x[i]) + 1.0f) * 0.5f;
  return y;
}

Tensor tanh01_backward(const Tensor& y, const Tensor& dy) {
  // y = (t+1)/2 with t = tanh(x): dy/dx = (1 - t^2)/2 and t = 2y - 1.
  Tensor dx(dy.shape());
  for (std::int64_t i = 0; i < dy.size(); ++i) {
    const float t = 2.0f * y[i] - 1.0f;
    dx[i] = dy[i] * (1.0f - t * t) * 0.5f;
  }
  return dx;
}

}  // namespace deoc::nn
