#include "deocclude/mask_synth.hpp"

#include <algorithm>
#include <cmath>

#include "deocclude/error.hpp"

namespace deoc {

void MaskGeometry::validate() const {
  if (margin_x < 0.0 || v_scale <= 0.0 || corner_radius < 0.0)
    throw GeometryError("mask geometry: margins must be non-negative and v_scale positive");
  if (min_area < 0.0 || max_area <= min_area || max_area > 1.0)
    throw GeometryError("mask geometry: invalid area bounds");
}

BinaryMask synthesize_hmd_mask(const LandmarkSet& lm, const MaskGeometry& geom,
                               int height, int width) {
  geom.validate();
  lm.validate();

  const double iod = lm.interocular_distance();
  if (iod <= 1e-9) throw GeometryError("degenerate landmarks: inter-ocular distance is zero");

  auto [lex, ley] = lm.left_eye_center();
  auto [rex, rey] = lm.right_eye_center();
  const double x_lo = lm.at("left-eye-outer").x - geom.margin_x * iod;
  const double x_hi = lm.at("right-eye-outer").x + geom.margin_x * iod;
  const double y_c = (ley + rey) / 2.0;
  const double half_h = geom.v_scale * iod;
  const double half_w = (x_hi - x_lo) / 2.0;
  const double x_c = (x_lo + x_hi) / 2.0;
  // Radius cannot exceed either half-extent of the band.
  const double radius = std::min({geom.corner_radius * iod, half_h, half_w});

  BinaryMask mask(height, width);
  for (int y = 0; y < height; ++y) {
    const double py = (y + 0.5) / height;
    for (int x = 0; x < width; ++x) {
      const double px = (x + 0.5) / width;
      // Rounded-rectangle membership via the corner-disc distance.
      const double dx = std::max(std::abs(px - x_c) - (half_w - radius), 0.0);
      const double dy = std::max(std::abs(py - y_c) - (half_h - radius), 0.0);
      if (dx * dx + dy * dy <= radius * radius) mask.at(y, x) = 1.0f;
    }
  }

  const double area = mask_area_fraction(mask);
  if (area < geom.min_area || area > geom.max_area)
    throw GeometryError("synthesized mask covers " + std::to_string(area * 100.0) +
                        "% of the image, outside [" + std::to_string(geom.min_area * 100.0) +
                        "%, " + std::to_string(geom.max_area * 100.0) + "%]");
  return mask;
}

}  // namespace deoc
