#pragma once

#include <string>
#include <vector>

#include "deocclude/image.hpp"

namespace deoc {

/// Writes a tiled comparison grid as a lossless PNG: one image row per
/// entry, a caption strip above the first row. All images must share one
/// size and rows must have equal length. Default captions are
/// "occluded, reconstructed, ground truth, baseline-1, ...".
void make_grid(const std::vector<std::vector<Image>>& rows, const std::string& path,
               std::vector<std::string> captions = {});

}  // namespace deoc
