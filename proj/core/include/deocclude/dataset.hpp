#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deocclude/image.hpp"
#include "deocclude/landmarks.hpp"
#include "deocclude/mask_synth.hpp"

namespace deoc {

enum class Split { pretrain, stage1, stage2, eval };

std::string split_name(Split s);
Split parse_split(const std::string& name);

/// Aligned training triple plus provenance.
struct FaceSample {
  Image gt;
  Image occ;
  BinaryMask mask;
  LandmarkSet landmarks;
  std::string subject_id;
  int frame_id = 0;
};

struct DatasetRecord {
  std::string subject_id;
  std::string sequence;  // source sequence key, "<subject>/<name>"
  int frame_id = 0;
  Split split = Split::stage2;
  // Paths relative to the dataset root.
  std::string gt_path;
  std::string occ_path;
  std::string mask_path;
  std::string landmarks_path;
};

struct DatasetManifest {
  std::vector<DatasetRecord> records;
  std::uint32_t seed = 0;
  MaskGeometry geometry;
  double jitter = 0.0;
  float fill = 0.0f;
  std::string root;  // directory holding the manifest; set on load/build

  std::vector<const DatasetRecord*> split_records(Split s) const;

  void save(const std::string& path) const;
  static DatasetManifest load(const std::string& path);
};

struct DatasetBuildConfig {
  /// Maps "<subject>/<sequence>" to a split name. Every discovered sequence
  /// must be assigned; splits are per-sequence, never per-frame.
  std::map<std::string, std::string> splits;
  MaskGeometry geometry;
  /// Relative jitter applied to margin_x / v_scale per frame (0 = none),
  /// drawn deterministically from `seed`.
  double jitter = 0.0;
  float fill = 0.0f;
  int stride = 1;
  std::uint32_t seed = 0;
  std::string landmark_provider = "sidecar";
  std::string landmark_command;
  /// Abort when more than this fraction of frames fails landmarking.
  double max_failure_fraction = 0.20;
  int crop_size = 256;
};

/// Walks raw_dir (one directory or video file per sequence, grouped by
/// subject), runs landmark detection, cropping, mask synthesis and
/// occlusion, and writes the on-disk layout
///   out_dir/<subject>/<split>/<frame:06d>.{gt,occ,mask}.png + .landmarks
/// plus manifest.json at the dataset root. Deterministic given the input
/// bytes, config and seed.
DatasetManifest build_dataset(const std::string& raw_dir, const std::string& out_dir,
                              const DatasetBuildConfig& config);

FaceSample load_sample(const DatasetManifest& manifest, const DatasetRecord& record);

/// Re-checks the FaceSample invariants (exact gt/occ agreement off-mask,
/// constant fill on-mask, binary single-component mask, landmark validity).
/// Throws DataError with a reason when any fails.
void validate_sample(const FaceSample& sample, float fill);

}  // namespace deoc
