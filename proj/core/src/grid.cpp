#include "deocclude/grid.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "deocclude/error.hpp"

namespace deoc {

namespace {
constexpr int kCaptionStrip = 24;
}

void make_grid(const std::vector<std::vector<Image>>& rows, const std::string& path,
               std::vector<std::string> captions) {
  if (rows.empty() || rows.front().empty()) throw EmptyInputError("make_grid: no rows");
  const std::size_t cols = rows.front().size();
  const int h = rows.front().front().height;
  const int w = rows.front().front().width;
  for (const auto& row : rows) {
    if (row.size() != cols) throw ShapeError("make_grid: ragged rows");
    for (const auto& img : row) {
      if (img.height != h || img.width != w)
        throw ShapeError("make_grid: mixed image sizes");
    }
  }

  if (captions.empty()) {
    const char* defaults[] = {"occluded", "reconstructed", "ground truth"};
    for (std::size_t c = 0; c < cols; ++c) {
      if (c < 3)
        captions.push_back(defaults[c]);
      else
        captions.push_back("baseline-" + std::to_string(c - 2));
    }
  }
  if (captions.size() != cols) throw ConfigError("make_grid: caption count must match columns");

  const int canvas_w = static_cast<int>(cols) * w;
  const int canvas_h = static_cast<int>(rows.size()) * h + kCaptionStrip;
  cv::Mat canvas(canvas_h, canvas_w, CV_8UC3, cv::Scalar(255, 255, 255));

  for (std::size_t c = 0; c < cols; ++c) {
    cv::putText(canvas, captions[c], {static_cast<int>(c) * w + 4, kCaptionStrip - 8},
                cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1, cv::LINE_8);
  }

  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const Image& img = rows[r][c];
      const int oy = kCaptionStrip + static_cast<int>(r) * h;
      const int ox = static_cast<int>(c) * w;
      for (int y = 0; y < h; ++y) {
        auto* out = canvas.ptr<cv::Vec3b>(oy + y);
        for (int x = 0; x < w; ++x) {
          const float r0 = std::min(1.0f, std::max(0.0f, img.at(y, x, 0)));
          const float g0 = std::min(1.0f, std::max(0.0f, img.at(y, x, 1)));
          const float b0 = std::min(1.0f, std::max(0.0f, img.at(y, x, 2)));
          out[ox + x] = {static_cast<std::uint8_t>(b0 * 255.0f + 0.5f),
                         static_cast<std::uint8_t>(g0 * 255.0f + 0.5f),
                         static_cast<std::uint8_t>(r0 * 255.0f + 0.5f)};
        }
      }
    }
  }
  if (!cv::imwrite(path, canvas, {cv::IMWRITE_PNG_COMPRESSION, 6}))
    throw IoError("failed to write grid image " + path);
}

}  // namespace deoc
