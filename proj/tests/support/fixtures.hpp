#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deocclude/dataset.hpp"
#include "deocclude/image.hpp"
#include "deocclude/landmarks.hpp"

namespace deoc::testing {

/// Subject-level appearance parameters for the synthetic face renderer.
struct FaceStyle {
  float skin[3];
  float hair[3];
  float iris[3];
  float bg_top[3];
  float bg_bottom[3];
  double face_rx;   // face half-axes, fraction of image size
  double face_ry;
  double eye_span;  // half-distance between eye centers / face_rx
  double mouth_width;
};

/// Per-frame variation (expression and pose jitter).
struct FramePose {
  double shift_x = 0.0;   // head shift, fraction of image size
  double shift_y = 0.0;
  double openness = 1.0;  // eyelid opening in [0.2, 1]
  double gaze = 0.0;      // pupil offset in [-1, 1]
  double smile = 0.0;     // mouth curvature in [-1, 1]
  double brightness = 1.0;
};

FaceStyle make_subject_style(std::uint64_t subject_seed);
FramePose make_frame_pose(std::uint64_t subject_seed, int frame_index);

/// Renders a deterministic cartoon face and reports exact landmarks in
/// normalized coordinates.
Image render_face(const FaceStyle& style, const FramePose& pose, int size, LandmarkSet* lm_out);

/// Canonical frontal landmark set used by the mask-shape tests: eyes on the
/// y = 0.40 line, nose tip at (0.5, 0.60).
LandmarkSet canonical_landmarks();

/// Writes frames + landmark sidecars as raw_dir/<subject>/<sequence>/NNN.png.
void write_sequence(const std::string& raw_dir, const std::string& subject,
                    const std::string& sequence, std::uint64_t subject_seed, int frames,
                    int size = 384, int first_frame_index = 0);

/// Standard fixture tree: a "generic" subject with `generic_frames` distinct
/// faces (pretrain) and one subject with stage1/stage2/eval sequences.
struct FixtureLayout {
  int generic_frames = 32;
  int stage1_frames = 16;
  int stage2_frames = 16;
  int eval_frames = 8;
  std::uint64_t person_seed = 11;
};

/// Returns the split map for build_dataset matching write_fixture_raw_dir.
std::map<std::string, std::string> fixture_split_map();

void write_fixture_raw_dir(const std::string& raw_dir, const FixtureLayout& layout);

/// Raw dir + build_dataset in one call; returns the manifest.
DatasetManifest build_fixture_dataset(const std::string& work_dir, const FixtureLayout& layout,
                                      std::uint32_t seed = 5);

}  // namespace deoc::testing
