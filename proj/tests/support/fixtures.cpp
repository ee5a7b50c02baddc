#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "deocclude/rng.hpp"

namespace fs = std::filesystem;

namespace deoc::testing {

namespace {

double smoothstep(double edge0, double edge1, double x) {
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

/// Coverage of an ellipse at (px, py): 1 inside, 0 outside, soft edge.
double ellipse_mask(double px, double py, double cx, double cy, double rx, double ry,
                    double soft = 0.004) {
  const double d = std::hypot((px - cx) / rx, (py - cy) / ry);
  return 1.0 - smoothstep(1.0 - soft / rx, 1.0 + soft / rx, d);
}

void blend(Image& img, int y, int x, const float rgb[3], double alpha) {
  if (alpha <= 0.0) return;
  for (int c = 0; c < 3; ++c) {
    const float v = img.at(y, x, c);
    img.at(y, x, c) = static_cast<float>(v * (1.0 - alpha) + rgb[c] * alpha);
  }
}

}  // namespace

FaceStyle make_subject_style(std::uint64_t subject_seed) {
  Rng rng(static_cast<std::uint32_t>(hash_seed("style", subject_seed)));
  FaceStyle s{};
  const float skin_base = static_cast<float>(rng.uniform(0.55, 0.88));
  s.skin[0] = skin_base;
  s.skin[1] = skin_base * static_cast<float>(rng.uniform(0.78, 0.9));
  s.skin[2] = skin_base * static_cast<float>(rng.uniform(0.6, 0.75));
  for (int c = 0; c < 3; ++c) s.hair[c] = static_cast<float>(rng.uniform(0.05, 0.45));
  s.iris[0] = static_cast<float>(rng.uniform(0.1, 0.6));
  s.iris[1] = static_cast<float>(rng.uniform(0.2, 0.6));
  s.iris[2] = static_cast<float>(rng.uniform(0.3, 0.8));
  for (int c = 0; c < 3; ++c) {
    s.bg_top[c] = static_cast<float>(rng.uniform(0.3, 0.9));
    s.bg_bottom[c] = static_cast<float>(rng.uniform(0.1, 0.7));
  }
  s.face_rx = rng.uniform(0.30, 0.34);
  s.face_ry = rng.uniform(0.38, 0.42);
  s.eye_span = rng.uniform(0.42, 0.48);
  s.mouth_width = rng.uniform(0.45, 0.6);
  return s;
}

FramePose make_frame_pose(std::uint64_t subject_seed, int frame_index) {
  Rng rng(static_cast<std::uint32_t>(
      hash_seed("pose#" + std::to_string(frame_index), subject_seed)));
  FramePose p;
  p.shift_x = rng.uniform(-0.012, 0.012);
  p.shift_y = rng.uniform(-0.012, 0.012);
  p.openness = rng.uniform(0.55, 1.0);
  p.gaze = rng.uniform(-0.8, 0.8);
  p.smile = rng.uniform(-1.0, 1.0);
  p.brightness = rng.uniform(0.92, 1.05);
  return p;
}

Image render_face(const FaceStyle& style, const FramePose& pose, int size, LandmarkSet* lm_out) {
  Image img(size, size);
  const double cx = 0.5 + pose.shift_x;
  const double cy = 0.52 + pose.shift_y;
  const double rx = style.face_rx;
  const double ry = style.face_ry;

  const double eye_y = cy - 0.18 * ry;
  const double eye_dx = style.eye_span * rx;          // center offset from midline
  const double iod = 2.0 * eye_dx;
  const double eye_half_w = 0.18 * iod;
  const double eye_half_h = 0.085 * iod * (0.35 + 0.65 * pose.openness);
  const double nose_y = eye_y + 0.60 * iod;
  const double mouth_y = eye_y + 0.95 * iod;

  const float sclera[3] = {0.96f, 0.96f, 0.94f};
  const float pupil[3] = {0.02f, 0.02f, 0.02f};
  const float brow[3] = {style.hair[0] * 0.7f, style.hair[1] * 0.7f, style.hair[2] * 0.7f};
  const float mouth_col[3] = {0.62f, 0.2f, 0.22f};
  const float nose_col[3] = {style.skin[0] * 0.82f, style.skin[1] * 0.8f, style.skin[2] * 0.8f};

  for (int y = 0; y < size; ++y) {
    const double py = (y + 0.5) / size;
    for (int x = 0; x < size; ++x) {
      const double px = (x + 0.5) / size;

      // Background gradient.
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = static_cast<float>(style.bg_top[c] * (1.0 - py) + style.bg_bottom[c] * py);

      // Hair cap behind the face.
      const double hair_a = ellipse_mask(px, py, cx, cy - 0.05, rx * 1.12, ry * 1.1);
      blend(img, y, x, style.hair, hair_a);

      // Face.
      const double face_a = ellipse_mask(px, py, cx, cy, rx, ry);
      blend(img, y, x, style.skin, face_a);
      // Forehead hairline.
      const double fringe = ellipse_mask(px, py, cx, cy - ry * 0.95, rx * 0.95, ry * 0.38);
      blend(img, y, x, style.hair, fringe * face_a);

      for (int side = -1; side <= 1; side += 2) {
        const double ex = cx + side * eye_dx;
        // Brow.
        const double brow_a =
            ellipse_mask(px, py, ex, eye_y - 0.30 * iod, eye_half_w * 1.35, 0.05 * iod);
        blend(img, y, x, brow, brow_a);
        // Sclera, iris, pupil.
        const double eye_a = ellipse_mask(px, py, ex, eye_y, eye_half_w, eye_half_h);
        blend(img, y, x, sclera, eye_a);
        const double gx = ex + pose.gaze * eye_half_w * 0.35;
        const double iris_a = ellipse_mask(px, py, gx, eye_y, eye_half_h * 0.95, eye_half_h * 0.95);
        blend(img, y, x, style.iris, iris_a * eye_a);
        const double pupil_a = ellipse_mask(px, py, gx, eye_y, eye_half_h * 0.45, eye_half_h * 0.45);
        blend(img, y, x, pupil, pupil_a * eye_a);
      }

      // Nose: slim wedge from bridge to tip.
      if (py > eye_y + 0.05 * iod && py < nose_y + 0.06 * iod) {
        const double t = (py - eye_y) / (nose_y - eye_y);
        const double half_w = (0.03 + 0.09 * t) * iod;
        if (std::abs(px - cx) < half_w) {
          const double a = 0.55 * smoothstep(0.0, 0.25, t) * (1.0 - smoothstep(0.95, 1.05, t));
          blend(img, y, x, nose_col, a * face_a);
        }
      }

      // Mouth: curved band.
      {
        const double half_w = style.mouth_width * rx;
        const double u = (px - cx) / half_w;
        if (std::abs(u) <= 1.0) {
          const double curve = pose.smile * 0.05 * iod * (u * u - 0.5);
          const double d = std::abs(py - (mouth_y + curve));
          const double thick = 0.045 * iod * (1.0 - 0.4 * u * u);
          const double a = 1.0 - smoothstep(thick * 0.7, thick, d);
          blend(img, y, x, mouth_col, a * face_a);
        }
      }

      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) =
            std::clamp(static_cast<float>(img.at(y, x, c) * pose.brightness), 0.0f, 1.0f);
    }
  }

  if (lm_out) {
    std::vector<LandmarkPoint> pts;
    pts.push_back({"left-eye-outer", cx - eye_dx - eye_half_w, eye_y});
    pts.push_back({"left-eye-inner", cx - eye_dx + eye_half_w, eye_y});
    pts.push_back({"right-eye-inner", cx + eye_dx - eye_half_w, eye_y});
    pts.push_back({"right-eye-outer", cx + eye_dx + eye_half_w, eye_y});
    pts.push_back({"nose-tip", cx, nose_y});
    *lm_out = LandmarkSet(std::move(pts));
  }
  return img;
}

LandmarkSet canonical_landmarks() {
  return LandmarkSet({{"left-eye-outer", 0.30, 0.40},
                      {"left-eye-inner", 0.42, 0.40},
                      {"right-eye-inner", 0.58, 0.40},
                      {"right-eye-outer", 0.70, 0.40},
                      {"nose-tip", 0.50, 0.60}});
}

void write_sequence(const std::string& raw_dir, const std::string& subject,
                    const std::string& sequence, std::uint64_t subject_seed, int frames, int size,
                    int first_frame_index) {
  const fs::path dir = fs::path(raw_dir) / subject / sequence;
  fs::create_directories(dir);
  const FaceStyle style = make_subject_style(subject_seed);
  for (int i = 0; i < frames; ++i) {
    const FramePose pose = make_frame_pose(subject_seed, first_frame_index + i);
    LandmarkSet lm;
    Image img = render_face(style, pose, size, &lm);
    std::ostringstream stem;
    stem << std::setw(3) << std::setfill('0') << i;
    save_png(img, (dir / (stem.str() + ".png")).string());
    save_landmarks(lm, (dir / (stem.str() + ".landmarks")).string());
  }
}

std::map<std::string, std::string> fixture_split_map() {
  return {{"generic/set0", "pretrain"},
          {"person/seq-a", "stage1"},
          {"person/seq-b", "stage2"},
          {"person/seq-c", "eval"}};
}

void write_fixture_raw_dir(const std::string& raw_dir, const FixtureLayout& layout) {
  // Pretrain frames: one distinct synthetic identity each.
  const fs::path dir = fs::path(raw_dir) / "generic" / "set0";
  fs::create_directories(dir);
  for (int i = 0; i < layout.generic_frames; ++i) {
    const FaceStyle style = make_subject_style(1000 + static_cast<std::uint64_t>(i));
    const FramePose pose = make_frame_pose(1000 + static_cast<std::uint64_t>(i), 0);
    LandmarkSet lm;
    Image img = render_face(style, pose, 384, &lm);
    std::ostringstream stem;
    stem << std::setw(3) << std::setfill('0') << i;
    save_png(img, (dir / (stem.str() + ".png")).string());
    save_landmarks(lm, (dir / (stem.str() + ".landmarks")).string());
  }
  write_sequence(raw_dir, "person", "seq-a", layout.person_seed, layout.stage1_frames, 384, 0);
  write_sequence(raw_dir, "person", "seq-b", layout.person_seed, layout.stage2_frames, 384, 100);
  write_sequence(raw_dir, "person", "seq-c", layout.person_seed, layout.eval_frames, 384, 200);
}

DatasetManifest build_fixture_dataset(const std::string& work_dir, const FixtureLayout& layout,
                                      std::uint32_t seed) {
  const std::string raw = work_dir + "/raw";
  const std::string data = work_dir + "/dataset";
  write_fixture_raw_dir(raw, layout);
  DatasetBuildConfig cfg;
  cfg.splits = fixture_split_map();
  cfg.seed = seed;
  return build_dataset(raw, data, cfg);
}

}  // namespace deoc::testing
