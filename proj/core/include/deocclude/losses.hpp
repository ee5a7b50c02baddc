#pragma once

#include <string>
#include <utility>
#include <vector>

#include "deocclude/image.hpp"

namespace deoc {

struct LossWeights {
  double rec = 1.0;
  double adv = 0.01;
  double ssim = 1.0;
  double mask = 1.0;

  void validate() const;  // all >= 0, at least one > 0
};

/// Per-step scalar loss terms. l_final is the weighted combination of the
/// generator-side terms.
struct LossReport {
  double l_rec = 0.0;
  double l_adv_g = 0.0;
  double l_adv_d = 0.0;
  double l_ssim = 0.0;
  double l_mask = 0.0;
  double l_final = 0.0;
  long step = 0;

  /// One structured-text (JSON) line for the training log.
  std::string to_log_line() const;
  static LossReport from_log_line(const std::string& line);
};

/// Mean absolute per-element difference.
double l1_loss(const Image& rec, const Image& gt);
std::vector<double> l1_loss_grad(const Image& rec, const Image& gt);

/// (l_d, l_g): the discriminator minimizes -[log d_real + log(1 - d_fake)],
/// the generator the non-saturating -log d_fake. Scores are clamped to
/// [1e-7, 1 - 1e-7] so the logs stay finite.
std::pair<double, double> adversarial_losses(double d_real, double d_fake);

/// Structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// C1 = 0.01^2, C2 = 0.03^2 for unit dynamic range, averaged over channels
/// and valid window positions. Throws SizeError below the window size.
double ssim(const Image& a, const Image& b);

/// 1 - ssim(rec, gt): zero iff structurally identical, always in [0, 2].
double ssim_loss(const Image& rec, const Image& gt);
std::vector<double> ssim_loss_grad(const Image& rec, const Image& gt);

/// Mean absolute difference over masked elements only (0 on an empty mask).
double mask_loss(const Image& rec, const Image& gt, const BinaryMask& mask);
std::vector<double> mask_loss_grad(const Image& rec, const Image& gt, const BinaryMask& mask);

/// Weighted generator objective. Throws NumericError naming the first
/// non-finite term.
double total_loss(const LossReport& parts, const LossWeights& w);

}  // namespace deoc
