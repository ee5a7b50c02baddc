#include "deocclude/crop.hpp"

#include <algorithm>
#include <cmath>

#include "deocclude/error.hpp"

namespace deoc {

float sample_bilinear(const Image& img, double sx, double sy, int channel) {
  sx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = sx - x0;
  const double fy = sy - y0;
  const double v00 = img.at(y0, x0, channel);
  const double v01 = img.at(y0, x1, channel);
  const double v10 = img.at(y1, x0, channel);
  const double v11 = img.at(y1, x1, channel);
  return static_cast<float>((v00 * (1 - fx) + v01 * fx) * (1 - fy) +
                            (v10 * (1 - fx) + v11 * fx) * fy);
}

std::pair<Image, LandmarkSet> crop_face(const Image& img, const LandmarkSet& lm, int out_size) {
  lm.validate();
  auto [lx, ly] = lm.left_eye_center();
  auto [rx, ry] = lm.right_eye_center();
  const double iod_px = std::hypot((rx - lx) * img.width, (ry - ly) * img.height);
  if (iod_px < 1.0)
    throw GeometryError("degenerate landmarks: inter-ocular distance is ~0 pixels");

  double side = 2.2 * iod_px;
  side = std::min(side, static_cast<double>(std::min(img.width, img.height)));

  auto [cx_n, cy_n] = lm.centroid();
  double x0 = cx_n * img.width - side / 2.0;
  double y0 = cy_n * img.height - side / 2.0;
  // Clamp the crop window into the image.
  x0 = std::clamp(x0, 0.0, img.width - side);
  y0 = std::clamp(y0, 0.0, img.height - side);

  Image out(out_size, out_size);
  const double scale = side / out_size;
  for (int y = 0; y < out_size; ++y) {
    const double sy = y0 + (y + 0.5) * scale - 0.5;
    for (int x = 0; x < out_size; ++x) {
      const double sx = x0 + (x + 0.5) * scale - 0.5;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = sample_bilinear(img, sx, sy, c);
    }
  }

  std::vector<LandmarkPoint> pts;
  for (const auto& p : lm.points()) {
    double nx = (p.x * img.width - x0) / side;
    double ny = (p.y * img.height - y0) / side;
    pts.push_back({p.label, std::clamp(nx, 0.0, 1.0), std::clamp(ny, 0.0, 1.0)});
  }
  return {std::move(out), LandmarkSet(std::move(pts))};
}

}  // namespace deoc
