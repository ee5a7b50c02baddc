#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "deocclude/image.hpp"
#include "deocclude/rng.hpp"
#include "deocclude/tensor.hpp"

namespace deoc::testing {

/// Direct per-window SSIM reference: for every 11x11 window position and
/// channel, weighted moments are accumulated with explicit loops (no
/// separable-filter shortcut). Independent of the library implementation.
inline double ssim_reference(const Image& a, const Image& b) {
  const int win = 11;
  const double sigma = 1.5;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double kernel[11][11];
  double ksum = 0.0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double dy = i - 5.0, dx = j - 5.0;
      kernel[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      ksum += kernel[i][j];
    }
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) kernel[i][j] /= ksum;

  double total = 0.0;
  int count = 0;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y + win <= a.height; ++y) {
      for (int x = 0; x + win <= a.width; ++x) {
        double ma = 0.0, mb = 0.0, va = 0.0, vb = 0.0, cov = 0.0;
        for (int i = 0; i < win; ++i)
          for (int j = 0; j < win; ++j) {
            const double w = kernel[i][j];
            const double av = a.at(y + i, x + j, c);
            const double bv = b.at(y + i, x + j, c);
            ma += w * av;
            mb += w * bv;
            va += w * av * av;
            vb += w * bv * bv;
            cov += w * av * bv;
          }
        va -= ma * ma;
        vb -= mb * mb;
        cov -= ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
  }
  return total / count;
}

/// Plain-loop PSNR reference.
inline double psnr_reference(const Image& a, const Image& b) {
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.rgb[i]) - b.rgb[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse <= 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

/// Elementwise fusion oracle: out[c,y,x] = fe*ae + fd*ad, nothing shared
/// with the library path.
inline Tensor fuse_reference(const Tensor& fe, const Tensor& fd, const Tensor& ae,
                             const Tensor& ad) {
  Tensor out(fe.shape());
  const int c = fe.dim(0), h = fe.dim(1), w = fe.dim(2);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(ch, y, x) = fe.at(ch, y, x) * ae[static_cast<std::int64_t>(y) * w + x] +
                           fd.at(ch, y, x) * ad[static_cast<std::int64_t>(y) * w + x];
  return out;
}

/// Central finite differences of a scalar functional of an image, h = 1e-4.
inline std::vector<double> finite_difference_grad(Image img,
                                                  const std::function<double(const Image&)>& f,
                                                  double h = 1e-4) {
  std::vector<double> g(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const float keep = img.rgb[i];
    img.rgb[i] = static_cast<float>(keep + h);
    const double fp = f(img);
    img.rgb[i] = static_cast<float>(keep - h);
    const double fm = f(img);
    img.rgb[i] = keep;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Largest relative mismatch between two gradient fields (elementwise, with
/// a small absolute floor so zero-against-zero compares clean).
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

inline Image random_image(int h, int w, Rng& rng) {
  Image img(h, w);
  for (auto& v : img.rgb) v = static_cast<float>(rng.uniform01());
  return img;
}

/// Random image pair whose per-element difference stays away from zero so
/// the L1 sign subgradient is stable under h = 1e-4 finite differences.
inline std::pair<Image, Image> random_pair_separated(int h, int w, Rng& rng,
                                                     double min_gap = 2e-3) {
  Image a = random_image(h, w, rng);
  Image b(h, w);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    const double gap = min_gap + rng.uniform01() * 0.4;
    double v = a.rgb[i] + sign * gap;
    if (v < 0.0 || v > 1.0) v = a.rgb[i] - sign * gap;
    b.rgb[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return {a, b};
}

inline BinaryMask random_mask(int h, int w, Rng& rng, double density = 0.4) {
  BinaryMask m(h, w);
  for (auto& v : m.values) v = rng.uniform01() < density ? 1.0f : 0.0f;
  return m;
}

inline Tensor random_tensor(const std::vector<int>& shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(shape);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

}  // namespace deoc::testing
