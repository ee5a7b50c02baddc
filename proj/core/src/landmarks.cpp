#include "deocclude/landmarks.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "deocclude/error.hpp"

namespace deoc {

LandmarkSet::LandmarkSet(std::vector<LandmarkPoint> points) : points_(std::move(points)) {}

const LandmarkPoint& LandmarkSet::at(const std::string& label) const {
  for (const auto& p : points_) {
    if (p.label == label) return p;
  }
  throw DataError("landmark label not present: " + label);
}

bool LandmarkSet::has(const std::string& label) const {
  return std::any_of(points_.begin(), points_.end(),
                     [&](const LandmarkPoint& p) { return p.label == label; });
}

void LandmarkSet::validate() const {
  for (const auto& p : points_) {
    if (p.x < 0.0 || p.x > 1.0 || p.y < 0.0 || p.y > 1.0)
      throw DataError("landmark '" + p.label + "' outside [0,1]: (" + std::to_string(p.x) +
                      ", " + std::to_string(p.y) + ")");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    for (std::size_t j = i + 1; j < points_.size(); ++j) {
      if (points_[i].label == points_[j].label)
        throw AmbiguityError("duplicate landmark label '" + points_[i].label +
                             "' (multiple faces?)");
    }
  }
  for (const auto& label : required_landmark_labels()) {
    if (!has(label)) throw DataError("required landmark label missing: " + label);
  }
}

std::pair<double, double> LandmarkSet::left_eye_center() const {
  const auto& o = at("left-eye-outer");
  const auto& i = at("left-eye-inner");
  return {(o.x + i.x) / 2.0, (o.y + i.y) / 2.0};
}

std::pair<double, double> LandmarkSet::right_eye_center() const {
  const auto& o = at("right-eye-outer");
  const auto& i = at("right-eye-inner");
  return {(o.x + i.x) / 2.0, (o.y + i.y) / 2.0};
}

double LandmarkSet::interocular_distance() const {
  auto [lx, ly] = left_eye_center();
  auto [rx, ry] = right_eye_center();
  return std::hypot(rx - lx, ry - ly);
}

std::pair<double, double> LandmarkSet::centroid() const {
  if (points_.empty()) throw DataError("centroid of empty landmark set");
  double sx = 0.0, sy = 0.0;
  for (const auto& p : points_) {
    sx += p.x;
    sy += p.y;
  }
  return {sx / points_.size(), sy / points_.size()};
}

LandmarkSet LandmarkSet::flipped_horizontal() const {
  auto swap_side = [](const std::string& label) {
    if (label.rfind("left-", 0) == 0) return "right-" + label.substr(5);
    if (label.rfind("right-", 0) == 0) return "left-" + label.substr(6);
    return label;
  };
  std::vector<LandmarkPoint> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back({swap_side(p.label), 1.0 - p.x, p.y});
  return LandmarkSet(std::move(out));
}

std::string LandmarkSet::to_text() const {
  std::ostringstream os;
  os.precision(17);
  for (const auto& p : points_) os << p.label << " " << p.x << " " << p.y << "\n";
  return os.str();
}

LandmarkSet LandmarkSet::from_text(const std::string& text, const std::string& origin) {
  std::vector<LandmarkPoint> pts;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    LandmarkPoint p;
    if (!(ls >> p.label >> p.x >> p.y))
      throw DataError("malformed landmark line " + std::to_string(lineno) + " in " + origin);
    pts.push_back(p);
  }
  return LandmarkSet(std::move(pts));
}

void save_landmarks(const LandmarkSet& lm, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("failed to open " + path + " for writing");
  f << lm.to_text();
}

LandmarkSet load_landmarks(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("failed to open landmark file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return LandmarkSet::from_text(ss.str(), path);
}

LandmarkSet SidecarLandmarkProvider::detect(const Image& img, const std::string& frame_id) const {
  (void)img;
  std::filesystem::path sidecar(frame_id);
  sidecar.replace_extension(".landmarks");
  if (!std::filesystem::exists(sidecar))
    throw DetectionError("no face found (no landmark sidecar) for frame " + frame_id);
  LandmarkSet lm = load_landmarks(sidecar.string());
  lm.validate();
  return lm;
}

LandmarkSet CommandLandmarkProvider::detect(const Image& img, const std::string& frame_id) const {
  namespace fs = std::filesystem;
  fs::path tmp = fs::temp_directory_path() /
                 ("deoc-lm-" + std::to_string(::getpid()) + "-" +
                  std::to_string(reinterpret_cast<std::uintptr_t>(&img) & 0xFFFF) + ".png");
  save_png(img, tmp.string());
  std::string cmd = command_ + " " + tmp.string();
  std::array<char, 4096> buf{};
  std::string output;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) {
    fs::remove(tmp);
    throw DetectionError("failed to launch landmark command for frame " + frame_id);
  }
  while (std::fgets(buf.data(), buf.size(), pipe)) output += buf.data();
  int status = ::pclose(pipe);
  fs::remove(tmp);
  if (status != 0)
    throw DetectionError("landmark command failed (frame " + frame_id + ")");
  LandmarkSet lm = LandmarkSet::from_text(output, "command output for " + frame_id);
  lm.validate();
  return lm;
}

std::unique_ptr<LandmarkProvider> make_landmark_provider(const std::string& kind,
                                                         const std::string& command) {
  if (kind == "sidecar") return std::make_unique<SidecarLandmarkProvider>();
  if (kind == "command") {
    if (command.empty()) throw ConfigError("landmark provider 'command' needs a command string");
    return std::make_unique<CommandLandmarkProvider>(command);
  }
  throw ConfigError("unknown landmark provider: " + kind);
}

}  // namespace deoc
