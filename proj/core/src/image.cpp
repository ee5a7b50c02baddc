#include "deocclude/image.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "deocclude/error.hpp"

namespace deoc {

void Image::clamp01() {
  for (float& v : rgb) v = std::min(1.0f, std::max(0.0f, v));
}

bool mask_is_binary(const BinaryMask& mask) {
  return std::all_of(mask.values.begin(), mask.values.end(),
                     [](float v) { return v == 0.0f || v == 1.0f; });
}

double mask_area_fraction(const BinaryMask& mask) {
  if (mask.values.empty()) return 0.0;
  double s = 0.0;
  for (float v : mask.values) s += v;
  return s / static_cast<double>(mask.values.size());
}

bool mask_single_component(const BinaryMask& mask) {
  const int h = mask.height, w = mask.width;
  std::vector<char> seen(static_cast<std::size_t>(h) * w, 0);
  int total = 0;
  int sy = -1, sx = -1;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.at(y, x) == 1.0f) {
        ++total;
        if (sy < 0) { sy = y; sx = x; }
      }
    }
  }
  if (total == 0) return false;
  std::queue<std::pair<int, int>> q;
  q.push({sy, sx});
  seen[static_cast<std::size_t>(sy) * w + sx] = 1;
  int reached = 0;
  const int dy[4] = {-1, 1, 0, 0};
  const int dx[4] = {0, 0, -1, 1};
  while (!q.empty()) {
    auto [y, x] = q.front();
    q.pop();
    ++reached;
    for (int k = 0; k < 4; ++k) {
      int ny = y + dy[k], nx = x + dx[k];
      if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
      std::size_t idx = static_cast<std::size_t>(ny) * w + nx;
      if (!seen[idx] && mask.at(ny, nx) == 1.0f) {
        seen[idx] = 1;
        q.push({ny, nx});
      }
    }
  }
  return reached == total;
}

Image apply_mask(const Image& gt, const BinaryMask& mask, float fill) {
  if (gt.height != mask.height || gt.width != mask.width)
    throw ShapeError("apply_mask: image is " + std::to_string(gt.height) + "x" +
                     std::to_string(gt.width) + " but mask is " +
                     std::to_string(mask.height) + "x" + std::to_string(mask.width));
  if (fill < 0.0f || fill > 1.0f)
    throw ConfigError("apply_mask: fill value must lie in [0,1]");
  Image occ = gt;
  for (int y = 0; y < gt.height; ++y) {
    for (int x = 0; x < gt.width; ++x) {
      if (mask.at(y, x) != 0.0f) {
        occ.at(y, x, 0) = fill;
        occ.at(y, x, 1) = fill;
        occ.at(y, x, 2) = fill;
      }
    }
  }
  return occ;
}

namespace {

cv::Mat to_mat8(const Image& img) {
  cv::Mat m(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      // OpenCV stores BGR.
      row[x][2] = static_cast<std::uint8_t>(std::lround(std::clamp(img.at(y, x, 0), 0.0f, 1.0f) * 255.0f));
      row[x][1] = static_cast<std::uint8_t>(std::lround(std::clamp(img.at(y, x, 1), 0.0f, 1.0f) * 255.0f));
      row[x][0] = static_cast<std::uint8_t>(std::lround(std::clamp(img.at(y, x, 2), 0.0f, 1.0f) * 255.0f));
    }
  }
  return m;
}

}  // namespace

void save_png(const Image& img, const std::string& path) {
  if (!cv::imwrite(path, to_mat8(img), {cv::IMWRITE_PNG_COMPRESSION, 6}))
    throw IoError("failed to write " + path);
}

Image load_png(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
  if (m.empty()) throw DecodeError("failed to decode image " + path);
  Image img(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < m.cols; ++x) {
      img.at(y, x, 0) = row[x][2] / 255.0f;
      img.at(y, x, 1) = row[x][1] / 255.0f;
      img.at(y, x, 2) = row[x][0] / 255.0f;
    }
  }
  return img;
}

void save_mask_png(const BinaryMask& mask, const std::string& path) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width; ++x) row[x] = mask.at(y, x) != 0.0f ? 255 : 0;
  }
  if (!cv::imwrite(path, m, {cv::IMWRITE_PNG_COMPRESSION, 6}))
    throw IoError("failed to write " + path);
}

BinaryMask load_mask_png(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw DecodeError("failed to decode mask " + path);
  BinaryMask mask(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) mask.at(y, x) = row[x] >= 128 ? 1.0f : 0.0f;
  }
  return mask;
}

}  // namespace deoc
