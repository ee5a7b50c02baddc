#pragma once

#include <utility>

#include "deocclude/image.hpp"
#include "deocclude/landmarks.hpp"

namespace deoc {

/// Square crop centered on the landmark centroid, side 2.2x the inter-ocular
/// distance, clamped to image bounds and resampled to out_size x out_size
/// with bilinear interpolation. Landmarks are re-expressed in crop
/// coordinates (clamped into [0,1]). Throws GeometryError on a degenerate
/// inter-ocular distance.
std::pair<Image, LandmarkSet> crop_face(const Image& img, const LandmarkSet& lm,
                                        int out_size = 256);

/// Bilinear sample with edge clamping; (sx, sy) in source pixel coordinates
/// where (0, 0) is the center of the top-left pixel.
float sample_bilinear(const Image& img, double sx, double sy, int channel);

}  // namespace deoc
