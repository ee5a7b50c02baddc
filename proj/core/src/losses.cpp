#include "deocclude/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "deocclude/error.hpp"

namespace deoc {

void LossWeights::validate() const {
  if (rec < 0.0 || adv < 0.0 || ssim < 0.0 || mask < 0.0)
    throw ConfigError("loss weights must be non-negative");
  if (rec == 0.0 && adv == 0.0 && ssim == 0.0 && mask == 0.0)
    throw ConfigError("at least one loss weight must be positive");
}

std::string LossReport::to_log_line() const {
  nlohmann::json j{{"step", step},   {"l_rec", l_rec},   {"l_adv_g", l_adv_g},
                   {"l_adv_d", l_adv_d}, {"l_ssim", l_ssim}, {"l_mask", l_mask},
                   {"l_final", l_final}};
  return j.dump();
}

LossReport LossReport::from_log_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(std::string("bad loss log line: ") + e.what());
  }
  LossReport r;
  r.step = j.at("step").get<long>();
  r.l_rec = j.at("l_rec").get<double>();
  r.l_adv_g = j.at("l_adv_g").get<double>();
  r.l_adv_d = j.at("l_adv_d").get<double>();
  r.l_ssim = j.at("l_ssim").get<double>();
  r.l_mask = j.at("l_mask").get<double>();
  r.l_final = j.at("l_final").get<double>();
  return r;
}

namespace {

void require_same_shape(const Image& a, const Image& b, const char* who) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(who) + ": images are " + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width));
}

}  // namespace

double l1_loss(const Image& rec, const Image& gt) {
  require_same_shape(rec, gt, "l1_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i)
    s += std::abs(static_cast<double>(rec.rgb[i]) - gt.rgb[i]);
  return s / static_cast<double>(rec.size());
}

std::vector<double> l1_loss_grad(const Image& rec, const Image& gt) {
  require_same_shape(rec, gt, "l1_loss");
  std::vector<double> g(rec.size(), 0.0);
  const double inv = 1.0 / static_cast<double>(rec.size());
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const double d = static_cast<double>(rec.rgb[i]) - gt.rgb[i];
    g[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
  }
  return g;
}

std::pair<double, double> adversarial_losses(double d_real, double d_fake) {
  constexpr double eps = 1e-7;
  d_real = std::clamp(d_real, eps, 1.0 - eps);
  d_fake = std::clamp(d_fake, eps, 1.0 - eps);
  const double l_d = -(std::log(d_real) + std::log(1.0 - d_fake));
  const double l_g = -std::log(d_fake);
  return {l_d, l_g};
}

// ---------------------------------------------------------------------------
// SSIM

namespace {

constexpr int kWin = 11;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWin>& gaussian_kernel() {
  static const std::array<double, kWin> k = [] {
    std::array<double, kWin> w{};
    const double sigma = 1.5;
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
      const double d = i - (kWin - 1) / 2.0;
      w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
      sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
  }();
  return k;
}

/// Separable valid-mode Gaussian blur: (h, w) -> (h-10, w-10).
void blur_valid(const double* in, int h, int w, double* out) {
  const auto& k = gaussian_kernel();
  const int vw = w - kWin + 1;
  const int vh = h - kWin + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * vw, 0.0);
  for (int y = 0; y < h; ++y) {
    const double* row = in + static_cast<std::size_t>(y) * w;
    double* trow = tmp.data() + static_cast<std::size_t>(y) * vw;
    for (int t = 0; t < kWin; ++t) {
      const double kv = k[t];
      for (int x = 0; x < vw; ++x) trow[x] += kv * row[x + t];
    }
  }
  std::fill(out, out + static_cast<std::size_t>(vh) * vw, 0.0);
  for (int t = 0; t < kWin; ++t) {
    const double kv = k[t];
    for (int y = 0; y < vh; ++y) {
      const double* trow = tmp.data() + static_cast<std::size_t>(y + t) * vw;
      double* orow = out + static_cast<std::size_t>(y) * vw;
      for (int x = 0; x < vw; ++x) orow[x] += kv * trow[x];
    }
  }
}

/// Adjoint of blur_valid: scatters a (h-10, w-10) field back to (h, w).
void blur_adjoint(const double* in, int h, int w, double* out) {
  const auto& k = gaussian_kernel();
  const int vw = w - kWin + 1;
  const int vh = h - kWin + 1;
  std::vector<double> tmp(static_cast<std::size_t>(vh) * w, 0.0);
  for (int y = 0; y < vh; ++y) {
    const double* row = in + static_cast<std::size_t>(y) * vw;
    double* trow = tmp.data() + static_cast<std::size_t>(y) * w;
    for (int t = 0; t < kWin; ++t) {
      const double kv = k[t];
      for (int x = 0; x < vw; ++x) trow[x + t] += kv * row[x];
    }
  }
  std::fill(out, out + static_cast<std::size_t>(h) * w, 0.0);
  for (int t = 0; t < kWin; ++t) {
    const double kv = k[t];
    for (int y = 0; y < vh; ++y) {
      const double* trow = tmp.data() + static_cast<std::size_t>(y) * w;
      double* orow = out + static_cast<std::size_t>(y + t) * w;
      for (int x = 0; x < w; ++x) orow[x] += kv * trow[x];
    }
  }
}

void extract_channel(const Image& img, int c, std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(img.height) * img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out[static_cast<std::size_t>(y) * img.width + x] = img.at(y, x, c);
}

struct SsimFields {
  // all on the valid grid
  std::vector<double> u, v, p, q, r;
};

void ssim_fields(const std::vector<double>& a, const std::vector<double>& b, int h, int w,
                 SsimFields& f) {
  const std::size_t n = static_cast<std::size_t>(h - kWin + 1) * (w - kWin + 1);
  f.u.resize(n);
  f.v.resize(n);
  f.p.resize(n);
  f.q.resize(n);
  f.r.resize(n);
  std::vector<double> tmp(a.size());
  blur_valid(a.data(), h, w, f.u.data());
  blur_valid(b.data(), h, w, f.v.data());
  for (std::size_t i = 0; i < a.size(); ++i) tmp[i] = a[i] * a[i];
  blur_valid(tmp.data(), h, w, f.p.data());
  for (std::size_t i = 0; i < a.size(); ++i) tmp[i] = b[i] * b[i];
  blur_valid(tmp.data(), h, w, f.q.data());
  for (std::size_t i = 0; i < a.size(); ++i) tmp[i] = a[i] * b[i];
  blur_valid(tmp.data(), h, w, f.r.data());
}

void check_ssim_size(const Image& a) {
  if (a.height < kWin || a.width < kWin)
    throw SizeError("ssim: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                    " is smaller than the " + std::to_string(kWin) + "x" + std::to_string(kWin) +
                    " window");
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  check_ssim_size(a);
  const int h = a.height, w = a.width;
  const std::size_t n = static_cast<std::size_t>(h - kWin + 1) * (w - kWin + 1);
  double total = 0.0;
  std::vector<double> ca, cb;
  SsimFields f;
  for (int c = 0; c < 3; ++c) {
    extract_channel(a, c, ca);
    extract_channel(b, c, cb);
    ssim_fields(ca, cb, h, w, f);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = f.u[i], v = f.v[i];
      const double sa = f.p[i] - u * u;
      const double sb = f.q[i] - v * v;
      const double sab = f.r[i] - u * v;
      const double a1 = 2.0 * u * v + kC1;
      const double a2 = 2.0 * sab + kC2;
      const double b1 = u * u + v * v + kC1;
      const double b2 = sa + sb + kC2;
      total += (a1 * a2) / (b1 * b2);
    }
  }
  return total / (3.0 * static_cast<double>(n));
}

double ssim_loss(const Image& rec, const Image& gt) { return 1.0 - ssim(rec, gt); }

std::vector<double> ssim_loss_grad(const Image& rec, const Image& gt) {
  require_same_shape(rec, gt, "ssim_loss");
  check_ssim_size(rec);
  const int h = rec.height, w = rec.width;
  const int vh = h - kWin + 1, vw = w - kWin + 1;
  const std::size_t n = static_cast<std::size_t>(vh) * vw;
  const double scale = -1.0 / (3.0 * static_cast<double>(n));  // d(1 - mean S)/dS

  std::vector<double> grad(rec.size(), 0.0);
  std::vector<double> ca, cb;
  std::vector<double> su(n), sp(n), sr(n);
  std::vector<double> adj(static_cast<std::size_t>(h) * w);
  SsimFields f;

  for (int c = 0; c < 3; ++c) {
    extract_channel(rec, c, ca);
    extract_channel(gt, c, cb);
    ssim_fields(ca, cb, h, w, f);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = f.u[i], v = f.v[i];
      const double a1 = 2.0 * u * v + kC1;
      const double a2 = 2.0 * (f.r[i] - u * v) + kC2;
      const double b1 = u * u + v * v + kC1;
      const double b2 = (f.p[i] - u * u) + (f.q[i] - v * v) + kC2;
      const double d = b1 * b2;
      const double s = (a1 * a2) / d;
      // dS/du with sigma terms expressed through the raw blurred fields.
      const double dn_du = 2.0 * v * (a2 - a1);
      const double dd_du = 2.0 * u * (b2 - b1);
      su[i] = scale * (dn_du - s * dd_du) / d;
      sp[i] = scale * (-s / b2);
      sr[i] = scale * (2.0 * a1 / d);
    }
    blur_adjoint(su.data(), h, w, adj.data());
    for (std::size_t i = 0; i < adj.size(); ++i) grad[i * 3 + c] += adj[i];
    blur_adjoint(sp.data(), h, w, adj.data());
    for (std::size_t i = 0; i < adj.size(); ++i) grad[i * 3 + c] += 2.0 * ca[i] * adj[i];
    blur_adjoint(sr.data(), h, w, adj.data());
    for (std::size_t i = 0; i < adj.size(); ++i) grad[i * 3 + c] += cb[i] * adj[i];
  }
  return grad;
}

// ---------------------------------------------------------------------------
// mask loss

double mask_loss(const Image& rec, const Image& gt, const BinaryMask& mask) {
  require_same_shape(rec, gt, "mask_loss");
  if (rec.height != mask.height || rec.width != mask.width)
    throw ShapeError("mask_loss: mask shape mismatch");
  double s = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < rec.height; ++y) {
    for (int x = 0; x < rec.width; ++x) {
      if (mask.at(y, x) == 0.0f) continue;
      for (int c = 0; c < 3; ++c)
        s += std::abs(static_cast<double>(rec.at(y, x, c)) - gt.at(y, x, c));
      count += 3;
    }
  }
  return count == 0 ? 0.0 : s / static_cast<double>(count);
}

std::vector<double> mask_loss_grad(const Image& rec, const Image& gt, const BinaryMask& mask) {
  require_same_shape(rec, gt, "mask_loss");
  if (rec.height != mask.height || rec.width != mask.width)
    throw ShapeError("mask_loss: mask shape mismatch");
  std::size_t count = 0;
  for (float v : mask.values)
    if (v != 0.0f) count += 3;
  std::vector<double> g(rec.size(), 0.0);
  if (count == 0) return g;
  const double inv = 1.0 / static_cast<double>(count);
  for (int y = 0; y < rec.height; ++y) {
    for (int x = 0; x < rec.width; ++x) {
      if (mask.at(y, x) == 0.0f) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = static_cast<double>(rec.at(y, x, c)) - gt.at(y, x, c);
        g[(static_cast<std::size_t>(y) * rec.width + x) * 3 + c] =
            d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
      }
    }
  }
  return g;
}

double total_loss(const LossReport& parts, const LossWeights& w) {
  w.validate();
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v))
      throw NumericError(std::string("non-finite loss term: ") + name);
  };
  check(parts.l_rec, "l_rec");
  check(parts.l_adv_g, "l_adv_g");
  check(parts.l_ssim, "l_ssim");
  check(parts.l_mask, "l_mask");
  return w.rec * parts.l_rec + w.adv * parts.l_adv_g + w.ssim * parts.l_ssim +
         w.mask * parts.l_mask;
}

}  // namespace deoc
