#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace deoc {

/// H x W x 3 raster, interleaved RGB, values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> rgb;  // size height * width * 3

  Image() = default;
  Image(int h, int w, float fill = 0.0f)
      : height(h), width(w), rgb(static_cast<std::size_t>(h) * w * 3, fill) {}

  float& at(int y, int x, int c) {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  float at(int y, int x, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::size_t size() const { return rgb.size(); }
  bool same_shape(const Image& o) const { return height == o.height && width == o.width; }

  /// Clamps every value into [0, 1].
  void clamp01();
};

/// H x W single-channel raster with values in {0, 1}; 1 marks the occluded
/// region to be inpainted.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<float> values;  // size height * width

  BinaryMask() = default;
  BinaryMask(int h, int w, float fill = 0.0f)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  float& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return values.size(); }
};

/// True when every element is exactly 0 or 1.
bool mask_is_binary(const BinaryMask& mask);

/// Fraction of elements equal to 1.
double mask_area_fraction(const BinaryMask& mask);

/// True when the set of 1-pixels is non-empty and 4-connected.
bool mask_single_component(const BinaryMask& mask);

/// X_occ: pixels under the mask are replaced by `fill`, all others copied
/// from `gt` unchanged. Throws ShapeError on mismatched shapes and
/// ConfigError when fill is outside [0, 1].
Image apply_mask(const Image& gt, const BinaryMask& mask, float fill = 0.0f);

/// 8-bit quantization used by the on-disk PNG layout. `quantize01` gives the
/// value a [0,1] float becomes after a PNG round trip.
inline float quantize01(float v) {
  float q = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<float>(static_cast<int>(q * 255.0f + 0.5f)) / 255.0f;
}

// Lossless 8-bit PNG I/O. Loading throws DecodeError on unreadable files.
void save_png(const Image& img, const std::string& path);
Image load_png(const std::string& path);
void save_mask_png(const BinaryMask& mask, const std::string& path);
BinaryMask load_mask_png(const std::string& path);

}  // namespace deoc
