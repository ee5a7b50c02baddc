#pragma once

#include "deocclude/image.hpp"
#include "deocclude/landmarks.hpp"

namespace deoc {

/// Headset mask shape parameters. All lengths are relative to the
/// inter-ocular distance.
struct MaskGeometry {
  double margin_x = 0.15;       // horizontal extension beyond the eye-outer corners
  double v_scale = 0.55;        // half-height of the band
  double corner_radius = 0.1;   // rounding radius
  double min_area = 0.05;       // accepted mask area fraction, inclusive
  double max_area = 0.45;

  void validate() const;
};

/// Rasterizes a rounded-corner horizontal band over the eye region at the
/// given resolution: it spans the eye-outer corners plus `margin_x` on each
/// side and is vertically centered on the eye line. Throws GeometryError
/// when the resulting area leaves [min_area, max_area].
BinaryMask synthesize_hmd_mask(const LandmarkSet& lm, const MaskGeometry& geom,
                               int height = 256, int width = 256);

}  // namespace deoc
