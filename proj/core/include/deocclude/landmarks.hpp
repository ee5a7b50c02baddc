#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "deocclude/image.hpp"

namespace deoc {

/// Landmark labels required by mask placement and cropping.
inline const std::vector<std::string>& required_landmark_labels() {
  static const std::vector<std::string> labels = {
      "left-eye-outer", "left-eye-inner", "right-eye-inner", "right-eye-outer", "nose-tip"};
  return labels;
}

struct LandmarkPoint {
  std::string label;
  double x = 0.0;  // normalized [0,1]
  double y = 0.0;
};

/// Named 2-D points in normalized image coordinates. The five required
/// labels must each appear exactly once; extra labels are carried along.
class LandmarkSet {
 public:
  LandmarkSet() = default;
  explicit LandmarkSet(std::vector<LandmarkPoint> points);

  const std::vector<LandmarkPoint>& points() const { return points_; }
  const LandmarkPoint& at(const std::string& label) const;
  bool has(const std::string& label) const;

  /// Throws DataError/AmbiguityError when coordinates leave [0,1], a
  /// required label is missing, or any label appears more than once.
  void validate() const;

  /// Eye centers (midpoint of the outer and inner corner) and the distance
  /// between them.
  std::pair<double, double> left_eye_center() const;
  std::pair<double, double> right_eye_center() const;
  double interocular_distance() const;

  /// Centroid over all points.
  std::pair<double, double> centroid() const;

  /// Mirror about the vertical axis: x -> 1-x, left/right labels swap.
  LandmarkSet flipped_horizontal() const;

  /// Sidecar format: one "label x y" line per point.
  std::string to_text() const;
  static LandmarkSet from_text(const std::string& text, const std::string& origin);

 private:
  std::vector<LandmarkPoint> points_;
};

void save_landmarks(const LandmarkSet& lm, const std::string& path);
LandmarkSet load_landmarks(const std::string& path);

/// Pluggable landmark source. `frame_id` only decorates error messages.
class LandmarkProvider {
 public:
  virtual ~LandmarkProvider() = default;
  virtual LandmarkSet detect(const Image& img, const std::string& frame_id) const = 0;
  virtual std::string name() const = 0;
};

/// Reads a sidecar file registered for the frame. This is the provider used
/// throughout the tests; absence of a sidecar maps to "no face found".
class SidecarLandmarkProvider : public LandmarkProvider {
 public:
  /// Sidecar path is derived from the frame id (a file path) by swapping its
  /// extension for ".landmarks".
  LandmarkSet detect(const Image& img, const std::string& frame_id) const override;
  std::string name() const override { return "sidecar"; }
};

/// Adapter for an external detector executable. The command is invoked as
/// `command <image.png>` and must print "label x y" lines on stdout; a
/// nonzero exit status maps to a detection error.
class CommandLandmarkProvider : public LandmarkProvider {
 public:
  explicit CommandLandmarkProvider(std::string command) : command_(std::move(command)) {}
  LandmarkSet detect(const Image& img, const std::string& frame_id) const override;
  std::string name() const override { return "command"; }

 private:
  std::string command_;
};

std::unique_ptr<LandmarkProvider> make_landmark_provider(const std::string& kind,
                                                         const std::string& command);

}  // namespace deoc
