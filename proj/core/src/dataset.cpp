#include "deocclude/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "deocclude/crop.hpp"
#include "deocclude/error.hpp"
#include "deocclude/rng.hpp"
#include "deocclude/video.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace deoc {

std::string split_name(Split s) {
  switch (s) {
    case Split::pretrain: return "pretrain";
    case Split::stage1: return "stage1";
    case Split::stage2: return "stage2";
    case Split::eval: return "eval";
  }
  throw ConfigError("unknown split value");
}

Split parse_split(const std::string& name) {
  if (name == "pretrain") return Split::pretrain;
  if (name == "stage1") return Split::stage1;
  if (name == "stage2") return Split::stage2;
  if (name == "eval") return Split::eval;
  throw ConfigError("unknown split name: " + name);
}

std::vector<const DatasetRecord*> DatasetManifest::split_records(Split s) const {
  std::vector<const DatasetRecord*> out;
  for (const auto& r : records) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

void DatasetManifest::save(const std::string& path) const {
  json j;
  j["format"] = "deocclude-dataset-v1";
  j["seed"] = seed;
  j["jitter"] = jitter;
  j["fill"] = fill;
  j["geometry"] = {{"margin_x", geometry.margin_x},
                   {"v_scale", geometry.v_scale},
                   {"corner_radius", geometry.corner_radius},
                   {"min_area", geometry.min_area},
                   {"max_area", geometry.max_area}};
  j["records"] = json::array();
  for (const auto& r : records) {
    j["records"].push_back({{"subject", r.subject_id},
                            {"sequence", r.sequence},
                            {"frame", r.frame_id},
                            {"split", split_name(r.split)},
                            {"gt", r.gt_path},
                            {"occ", r.occ_path},
                            {"mask", r.mask_path},
                            {"landmarks", r.landmarks_path}});
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("failed to write manifest " + path);
  f << j.dump(2) << "\n";
}

DatasetManifest DatasetManifest::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("failed to open manifest " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw CorruptFileError("manifest " + path + " is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != "deocclude-dataset-v1")
    throw VersionError("manifest " + path + " has unknown format tag");
  DatasetManifest m;
  m.seed = j.at("seed").get<std::uint32_t>();
  m.jitter = j.value("jitter", 0.0);
  m.fill = j.value("fill", 0.0f);
  const auto& g = j.at("geometry");
  m.geometry.margin_x = g.at("margin_x").get<double>();
  m.geometry.v_scale = g.at("v_scale").get<double>();
  m.geometry.corner_radius = g.at("corner_radius").get<double>();
  m.geometry.min_area = g.value("min_area", 0.05);
  m.geometry.max_area = g.value("max_area", 0.45);
  for (const auto& rj : j.at("records")) {
    DatasetRecord r;
    r.subject_id = rj.at("subject").get<std::string>();
    r.sequence = rj.at("sequence").get<std::string>();
    r.frame_id = rj.at("frame").get<int>();
    r.split = parse_split(rj.at("split").get<std::string>());
    r.gt_path = rj.at("gt").get<std::string>();
    r.occ_path = rj.at("occ").get<std::string>();
    r.mask_path = rj.at("mask").get<std::string>();
    r.landmarks_path = rj.at("landmarks").get<std::string>();
    m.records.push_back(std::move(r));
  }
  m.root = fs::path(path).parent_path().string();
  return m;
}

namespace {

struct RawFrame {
  Image image;
  std::string frame_ref;  // path-like reference used by sidecar lookup
};

struct RawSequence {
  std::string subject;
  std::string name;  // sequence name without subject prefix
  std::string key;   // "<subject>/<name>"
  std::vector<RawFrame> frames;
};

bool has_image_extension(const fs::path& p) {
  auto e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), ::tolower);
  return e == ".png" || e == ".jpg" || e == ".jpeg" || e == ".bmp";
}

bool has_video_extension(const fs::path& p) {
  auto e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), ::tolower);
  return e == ".avi" || e == ".mp4" || e == ".mov" || e == ".mkv";
}

std::vector<RawSequence> scan_raw_dir(const std::string& raw_dir, int stride) {
  if (!fs::is_directory(raw_dir)) throw DataError("raw directory does not exist: " + raw_dir);
  std::vector<RawSequence> sequences;
  std::vector<fs::path> subjects;
  for (const auto& e : fs::directory_iterator(raw_dir)) {
    if (e.is_directory()) subjects.push_back(e.path());
  }
  std::sort(subjects.begin(), subjects.end());
  for (const auto& subject_dir : subjects) {
    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(subject_dir)) entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());
    for (const auto& entry : entries) {
      RawSequence seq;
      seq.subject = subject_dir.filename().string();
      if (fs::is_directory(entry)) {
        seq.name = entry.filename().string();
        std::vector<fs::path> files;
        for (const auto& f : fs::directory_iterator(entry)) {
          if (f.is_regular_file() && has_image_extension(f.path())) files.push_back(f.path());
        }
        std::sort(files.begin(), files.end());
        int index = 0;
        for (const auto& f : files) {
          if (index++ % stride != 0) continue;
          seq.frames.push_back({load_png(f.string()), f.string()});
        }
      } else if (fs::is_regular_file(entry) && has_video_extension(entry)) {
        seq.name = entry.stem().string();
        auto frames = extract_frames(entry.string(), stride);
        for (std::size_t i = 0; i < frames.size(); ++i) {
          // Sidecars for video frames live next to the file as
          // <stem>.<index:06d>.landmarks (index counts emitted frames).
          std::ostringstream ref;
          ref << (entry.parent_path() / entry.stem()).string() << "." << std::setw(6)
              << std::setfill('0') << i << ".png";
          seq.frames.push_back({std::move(frames[i]), ref.str()});
        }
      } else {
        continue;
      }
      seq.key = seq.subject + "/" + seq.name;
      sequences.push_back(std::move(seq));
    }
  }
  if (sequences.empty()) throw EmptyInputError("no sequences found under " + raw_dir);
  return sequences;
}

}  // namespace

DatasetManifest build_dataset(const std::string& raw_dir, const std::string& out_dir,
                              const DatasetBuildConfig& config) {
  config.geometry.validate();
  if (config.stride < 1) throw ConfigError("build_dataset: stride must be >= 1");
  if (config.jitter < 0.0 || config.jitter >= 1.0)
    throw ConfigError("build_dataset: jitter must lie in [0,1)");
  auto provider = make_landmark_provider(config.landmark_provider, config.landmark_command);

  auto sequences = scan_raw_dir(raw_dir, config.stride);

  // Every sequence needs a split; unknown assignments are config errors.
  for (const auto& seq : sequences) {
    if (config.splits.find(seq.key) == config.splits.end())
      throw ConfigError("no split assigned for sequence " + seq.key);
  }
  for (const auto& [key, name] : config.splits) parse_split(name);  // validates names

  DatasetManifest manifest;
  manifest.seed = config.seed;
  manifest.geometry = config.geometry;
  manifest.jitter = config.jitter;
  manifest.fill = config.fill;
  manifest.root = out_dir;

  fs::create_directories(out_dir);

  std::vector<std::string> failures;
  std::size_t total_frames = 0;
  // Frame numbering restarts per (subject, split) directory.
  std::map<std::string, int> next_index;

  for (const auto& seq : sequences) {
    const Split split = parse_split(config.splits.at(seq.key));
    const std::string rel_dir = seq.subject + "/" + split_name(split);
    fs::create_directories(fs::path(out_dir) / rel_dir);

    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
      ++total_frames;
      const auto& raw = seq.frames[i];
      try {
        LandmarkSet lm = provider->detect(raw.image, raw.frame_ref);
        auto [cropped, lm_crop] = crop_face(raw.image, lm, config.crop_size);

        MaskGeometry geom = config.geometry;
        if (config.jitter > 0.0) {
          Rng jrng(static_cast<std::uint32_t>(
              hash_seed(seq.key + "#" + std::to_string(i), config.seed)));
          geom.margin_x *= 1.0 + config.jitter * (2.0 * jrng.uniform01() - 1.0);
          geom.v_scale *= 1.0 + config.jitter * (2.0 * jrng.uniform01() - 1.0);
        }
        BinaryMask mask = synthesize_hmd_mask(lm_crop, geom, config.crop_size, config.crop_size);
        Image occ = apply_mask(cropped, mask, config.fill);

        const int frame_id = next_index[rel_dir]++;
        std::ostringstream stem;
        stem << std::setw(6) << std::setfill('0') << frame_id;
        const std::string base = rel_dir + "/" + stem.str();

        save_png(cropped, (fs::path(out_dir) / (base + ".gt.png")).string());
        save_png(occ, (fs::path(out_dir) / (base + ".occ.png")).string());
        save_mask_png(mask, (fs::path(out_dir) / (base + ".mask.png")).string());
        save_landmarks(lm_crop, (fs::path(out_dir) / (base + ".landmarks")).string());

        DatasetRecord rec;
        rec.subject_id = seq.subject;
        rec.sequence = seq.key;
        rec.frame_id = frame_id;
        rec.split = split;
        rec.gt_path = base + ".gt.png";
        rec.occ_path = base + ".occ.png";
        rec.mask_path = base + ".mask.png";
        rec.landmarks_path = base + ".landmarks";
        manifest.records.push_back(std::move(rec));
      } catch (const Error& e) {
        failures.push_back(seq.key + " frame " + std::to_string(i) + ": " + e.what());
      }
    }
  }

  if (total_frames == 0) throw EmptyInputError("no frames found under " + raw_dir);
  const double failure_fraction = static_cast<double>(failures.size()) / total_frames;
  if (failure_fraction > config.max_failure_fraction) {
    std::ostringstream report;
    report << "landmark/processing failures on " << failures.size() << "/" << total_frames
           << " frames (limit " << config.max_failure_fraction * 100.0 << "%):";
    for (const auto& line : failures) report << "\n  " << line;
    throw DataError(report.str());
  }

  manifest.save((fs::path(out_dir) / "manifest.json").string());
  return manifest;
}

FaceSample load_sample(const DatasetManifest& manifest, const DatasetRecord& record) {
  const fs::path root(manifest.root);
  FaceSample s;
  s.gt = load_png((root / record.gt_path).string());
  s.occ = load_png((root / record.occ_path).string());
  s.mask = load_mask_png((root / record.mask_path).string());
  s.landmarks = load_landmarks((root / record.landmarks_path).string());
  s.subject_id = record.subject_id;
  s.frame_id = record.frame_id;
  return s;
}

void validate_sample(const FaceSample& sample, float fill) {
  if (!sample.gt.same_shape(sample.occ) || sample.gt.height != sample.mask.height ||
      sample.gt.width != sample.mask.width)
    throw DataError("sample rasters disagree in shape");
  if (!mask_is_binary(sample.mask)) throw DataError("mask is not strictly binary");
  if (!mask_single_component(sample.mask))
    throw DataError("mask region is not a single connected component");
  sample.landmarks.validate();
  const float qfill = quantize01(fill);
  for (int y = 0; y < sample.gt.height; ++y) {
    for (int x = 0; x < sample.gt.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float g = sample.gt.at(y, x, c);
        const float o = sample.occ.at(y, x, c);
        if (g < 0.0f || g > 1.0f || o < 0.0f || o > 1.0f)
          throw DataError("pixel values outside [0,1]");
        if (sample.mask.at(y, x) == 0.0f) {
          if (o != g)
            throw DataError("occluded image differs from gt outside the mask at (" +
                            std::to_string(y) + "," + std::to_string(x) + ")");
        } else if (o != qfill) {
          throw DataError("occluded image is not the fill value under the mask at (" +
                          std::to_string(y) + "," + std::to_string(x) + ")");
        }
      }
    }
  }
}

}  // namespace deoc
