#include <cmath>
#include <filesystem>

#include "deocclude/checkpoint.hpp"
#include "deocclude/error.hpp"
#include "deocclude/metrics.hpp"
#include "deocclude/model.hpp"
#include "deocclude/rng.hpp"

namespace deoc {

namespace {

/// Stateless 3x3 conv (stride 1, pad 1) + leaky ReLU used by the feature
/// pyramids. Weights are (Cout, Cin, 3, 3).
Tensor conv3_lrelu(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int cin = x.dim(0), h = x.dim(1), ww = x.dim(2);
  const int cout = w.dim(0);
  Tensor y({cout, h, ww});
  for (int co = 0; co < cout; ++co) {
    float* yc = y.data() + static_cast<std::size_t>(co) * h * ww;
    for (int i = 0; i < h * ww; ++i) yc[i] = b[co];
    for (int ci = 0; ci < cin; ++ci) {
      const float* xc = x.data() + static_cast<std::size_t>(ci) * h * ww;
      const float* wk = w.data() + ((static_cast<std::size_t>(co) * cin + ci) * 9);
      for (int ky = -1; ky <= 1; ++ky) {
        for (int kx = -1; kx <= 1; ++kx) {
          const float kv = wk[(ky + 1) * 3 + (kx + 1)];
          if (kv == 0.0f) continue;
          const int y0 = std::max(0, -ky), y1 = std::min(h, h - ky);
          for (int yy = y0; yy < y1; ++yy) {
            const float* src = xc + static_cast<std::size_t>(yy + ky) * ww;
            float* dst = yc + static_cast<std::size_t>(yy) * ww;
            const int x0 = std::max(0, -kx), x1 = std::min(ww, ww - kx);
            for (int xx = x0; xx < x1; ++xx) dst[xx] += kv * src[xx + kx];
          }
        }
      }
    }
  }
  for (std::int64_t i = 0; i < y.size(); ++i)
    if (y[i] < 0.0f) y[i] *= 0.2f;
  return y;
}

Tensor avgpool2(const Tensor& x) {
  const int c = x.dim(0), h = x.dim(1) / 2, w = x.dim(2) / 2;
  Tensor y({c, h, w});
  for (int ch = 0; ch < c; ++ch) {
    for (int yy = 0; yy < h; ++yy) {
      const float* r0 = x.data() + (static_cast<std::size_t>(ch) * x.dim(1) + 2 * yy) * x.dim(2);
      const float* r1 = r0 + x.dim(2);
      float* dst = y.data() + (static_cast<std::size_t>(ch) * h + yy) * w;
      for (int xx = 0; xx < w; ++xx)
        dst[xx] = 0.25f * (r0[2 * xx] + r0[2 * xx + 1] + r1[2 * xx] + r1[2 * xx + 1]);
    }
  }
  return y;
}

class ConvPyramidBackbone : public LpipsBackbone {
 public:
  ConvPyramidBackbone(std::vector<std::pair<Tensor, Tensor>> stages, std::string id)
      : stages_(std::move(stages)), id_(std::move(id)) {}

  std::vector<Tensor> features(const Image& img) const override {
    Tensor x = image_to_tensor(img);
    for (std::int64_t i = 0; i < x.size(); ++i) x[i] = x[i] * 2.0f - 1.0f;
    std::vector<Tensor> feats;
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      x = conv3_lrelu(x, stages_[s].first, stages_[s].second);
      feats.push_back(x);
      if (s + 1 < stages_.size()) x = avgpool2(x);
    }
    return feats;
  }

  std::string id() const override { return id_; }

 private:
  std::vector<std::pair<Tensor, Tensor>> stages_;  // (weights, bias) per stage
  std::string id_;
};

}  // namespace

std::unique_ptr<LpipsBackbone> make_random_lpips_backbone(std::uint32_t seed) {
  Rng rng(seed);
  const int chain[] = {3, 8, 16, 32, 64};
  std::vector<std::pair<Tensor, Tensor>> stages;
  for (int s = 0; s < 4; ++s) {
    Tensor w({chain[s + 1], chain[s], 3, 3});
    Tensor b({chain[s + 1]});
    nn::fill_he_normal(w, chain[s] * 9, rng);
    stages.emplace_back(std::move(w), std::move(b));
  }
  return std::make_unique<ConvPyramidBackbone>(std::move(stages),
                                               "random-" + std::to_string(seed));
}

std::unique_ptr<LpipsBackbone> load_lpips_backbone(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw DataError("LPIPS backbone weights not found: " + path);
  LoadedCheckpoint ck = load_checkpoint_file(path);
  std::vector<std::pair<Tensor, Tensor>> stages;
  for (int s = 0;; ++s) {
    auto wit = ck.arrays.find("lpips/conv" + std::to_string(s) + ".w");
    if (wit == ck.arrays.end()) break;
    auto bit = ck.arrays.find("lpips/conv" + std::to_string(s) + ".b");
    if (bit == ck.arrays.end())
      throw CorruptFileError("LPIPS backbone " + path + " lacks a bias for stage " +
                             std::to_string(s));
    stages.emplace_back(wit->second, bit->second);
  }
  if (stages.empty())
    throw CorruptFileError("LPIPS backbone " + path + " contains no lpips/convN.w arrays");
  return std::make_unique<ConvPyramidBackbone>(
      std::move(stages), std::filesystem::path(path).stem().string());
}

double lpips(const Image& a, const Image& b, const LpipsBackbone& backbone) {
  if (!a.same_shape(b)) throw ShapeError("lpips: image shape mismatch");
  const auto fa = backbone.features(a);
  const auto fb = backbone.features(b);
  double total = 0.0;
  for (std::size_t layer = 0; layer < fa.size(); ++layer) {
    const Tensor& x = fa[layer];
    const Tensor& y = fb[layer];
    const int c = x.dim(0);
    const std::int64_t plane = static_cast<std::int64_t>(x.dim(1)) * x.dim(2);
    double energy = 0.0;
    for (std::int64_t p = 0; p < plane; ++p) {
      double nx = 0.0, ny = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        const double xv = x[ch * plane + p];
        const double yv = y[ch * plane + p];
        nx += xv * xv;
        ny += yv * yv;
      }
      nx = std::sqrt(nx) + 1e-10;
      ny = std::sqrt(ny) + 1e-10;
      for (int ch = 0; ch < c; ++ch) {
        const double d = x[ch * plane + p] / nx - y[ch * plane + p] / ny;
        energy += d * d;
      }
    }
    total += energy / static_cast<double>(plane);
  }
  return total / static_cast<double>(fa.size());
}

}  // namespace deoc
