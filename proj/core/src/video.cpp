#include "deocclude/video.hpp"

#include <filesystem>

#include <opencv2/videoio.hpp>

#include "deocclude/error.hpp"

namespace deoc {

std::vector<Image> extract_frames(const std::string& video_path, int stride) {
  if (stride < 1) throw ConfigError("extract_frames: stride must be >= 1");
  if (!std::filesystem::exists(video_path))
    throw DecodeError("video file does not exist: " + video_path);

  cv::VideoCapture cap(video_path);
  if (!cap.isOpened()) throw DecodeError("failed to open video: " + video_path);

  std::vector<Image> out;
  cv::Mat frame;
  for (int index = 0; cap.read(frame); ++index) {
    if (index % stride != 0) continue;
    if (frame.channels() != 3) throw DecodeError("unsupported frame format in " + video_path);
    Image img(frame.rows, frame.cols);
    for (int y = 0; y < frame.rows; ++y) {
      const auto* row = frame.ptr<cv::Vec3b>(y);
      for (int x = 0; x < frame.cols; ++x) {
        img.at(y, x, 0) = row[x][2] / 255.0f;
        img.at(y, x, 1) = row[x][1] / 255.0f;
        img.at(y, x, 2) = row[x][0] / 255.0f;
      }
    }
    out.push_back(std::move(img));
  }
  if (out.empty()) throw EmptyInputError("video decoded to zero frames: " + video_path);
  return out;
}

void write_video(const std::string& path, const std::vector<Image>& frames, double fps) {
  if (frames.empty()) throw EmptyInputError("write_video: no frames");
  const int h = frames.front().height;
  const int w = frames.front().width;
  cv::VideoWriter writer(path, cv::VideoWriter::fourcc('M', 'J', 'P', 'G'), fps, {w, h});
  if (!writer.isOpened()) throw IoError("failed to open video writer for " + path);
  cv::Mat m(h, w, CV_8UC3);
  for (const auto& img : frames) {
    if (img.height != h || img.width != w) throw ShapeError("write_video: mixed frame sizes");
    for (int y = 0; y < h; ++y) {
      auto* row = m.ptr<cv::Vec3b>(y);
      for (int x = 0; x < w; ++x) {
        row[x][2] = static_cast<std::uint8_t>(std::min(1.0f, std::max(0.0f, img.at(y, x, 0))) * 255.0f + 0.5f);
        row[x][1] = static_cast<std::uint8_t>(std::min(1.0f, std::max(0.0f, img.at(y, x, 1))) * 255.0f + 0.5f);
        row[x][0] = static_cast<std::uint8_t>(std::min(1.0f, std::max(0.0f, img.at(y, x, 2))) * 255.0f + 0.5f);
      }
    }
    writer.write(m);
  }
}

}  // namespace deoc
