#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "deocclude/dataset.hpp"
#include "deocclude/image.hpp"
#include "deocclude/losses.hpp"
#include "deocclude/tensor.hpp"

namespace deoc {

/// Peak signal-to-noise ratio in dB for unit dynamic range, capped at 100
/// (the value reported for identical images).
double psnr(const Image& a, const Image& b);

/// Pluggable LPIPS feature extractor.
class LpipsBackbone {
 public:
  virtual ~LpipsBackbone() = default;
  /// Multi-scale feature stack for an image; each entry is (C, H, W).
  virtual std::vector<Tensor> features(const Image& img) const = 0;
  virtual std::string id() const = 0;
};

/// Seeded fixed-random convolutional pyramid. Values are self-consistent but
/// not comparable to published LPIPS numbers.
std::unique_ptr<LpipsBackbone> make_random_lpips_backbone(std::uint32_t seed);

/// Adapter loading pretrained conv weights from a checkpoint-format file.
std::unique_ptr<LpipsBackbone> load_lpips_backbone(const std::string& path);

/// Mean over layers of the per-position unit-normalized feature difference
/// energy. Zero for identical inputs, symmetric in (a, b).
double lpips(const Image& a, const Image& b, const LpipsBackbone& backbone);

struct MetricRow {
  std::string id;
  double ssim = 0.0;
  double psnr = 0.0;
  std::optional<double> lpips;
};

struct MetricsReport {
  std::vector<MetricRow> rows;
  double mean_ssim = 0.0;
  double mean_psnr = 0.0;
  std::optional<double> mean_lpips;
  std::string checkpoint_id;
  std::string dataset_id;
  std::string lpips_backbone = "none";

  /// Recomputes the aggregate means from the rows.
  void finalize();

  void save(const std::string& path) const;
  static MetricsReport load(const std::string& path);
};

struct EvalConfig {
  std::string lpips_mode = "random";  // "random" | "external" | "none"
  std::uint32_t lpips_seed = 17;
  std::string lpips_weights;  // used in external mode

  std::unique_ptr<LpipsBackbone> make_backbone() const;
};

/// Metric rows for explicit (id, reconstruction, ground truth) triples.
MetricsReport evaluate_pairs(
    const std::vector<std::tuple<std::string, const Image*, const Image*>>& pairs,
    const LpipsBackbone* backbone);

/// Runs the checkpointed generator over a dataset split (generate +
/// composite per sample) and scores against X_gt.
MetricsReport evaluate(const std::string& checkpoint_path, const DatasetManifest& dataset,
                       Split split, const EvalConfig& config);

/// One ablation table row (aggregate metrics for one trained variant).
struct AblationRow {
  std::string label;
  double ssim = 0.0;
  double psnr = 0.0;
  std::optional<double> lpips;
};

void save_ablation_report(const std::vector<AblationRow>& rows, const std::string& path);

}  // namespace deoc
