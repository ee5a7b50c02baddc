#include "deocclude/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "deocclude/checkpoint.hpp"
#include "deocclude/error.hpp"

using json = nlohmann::json;

namespace deoc {

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b))
    throw ShapeError("psnr: images are " + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width));
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.rgb[i]) - b.rgb[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse <= 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

void MetricsReport::finalize() {
  mean_ssim = 0.0;
  mean_psnr = 0.0;
  double lp = 0.0;
  bool has_lpips = !rows.empty();
  for (const auto& r : rows) {
    mean_ssim += r.ssim;
    mean_psnr += r.psnr;
    if (r.lpips)
      lp += *r.lpips;
    else
      has_lpips = false;
  }
  if (!rows.empty()) {
    mean_ssim /= static_cast<double>(rows.size());
    mean_psnr /= static_cast<double>(rows.size());
  }
  mean_lpips = has_lpips ? std::optional<double>(lp / static_cast<double>(rows.size()))
                         : std::nullopt;
}

void MetricsReport::save(const std::string& path) const {
  json j;
  j["format"] = "deocclude-metrics-v1";
  j["checkpoint"] = checkpoint_id;
  j["dataset"] = dataset_id;
  j["lpips_backbone"] = lpips_backbone;
  j["rows"] = json::array();
  for (const auto& r : rows) {
    json row{{"id", r.id}, {"ssim", r.ssim}, {"psnr", r.psnr}};
    row["lpips"] = r.lpips ? json(*r.lpips) : json(nullptr);
    j["rows"].push_back(std::move(row));
  }
  j["count"] = rows.size();
  j["aggregate"] = {{"ssim", mean_ssim},
                    {"psnr", mean_psnr},
                    {"lpips", mean_lpips ? json(*mean_lpips) : json(nullptr)}};
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("failed to write metrics report " + path);
  f << j.dump(2) << "\n";
}

MetricsReport MetricsReport::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("failed to open metrics report " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw CorruptFileError("metrics report " + path + ": " + e.what());
  }
  if (j.value("format", "") != "deocclude-metrics-v1")
    throw VersionError("metrics report " + path + " has an unknown format tag");
  MetricsReport r;
  r.checkpoint_id = j.value("checkpoint", "");
  r.dataset_id = j.value("dataset", "");
  r.lpips_backbone = j.value("lpips_backbone", "none");
  for (const auto& rj : j.at("rows")) {
    MetricRow row;
    row.id = rj.at("id").get<std::string>();
    row.ssim = rj.at("ssim").get<double>();
    row.psnr = rj.at("psnr").get<double>();
    if (!rj.at("lpips").is_null()) row.lpips = rj.at("lpips").get<double>();
    r.rows.push_back(std::move(row));
  }
  r.mean_ssim = j.at("aggregate").at("ssim").get<double>();
  r.mean_psnr = j.at("aggregate").at("psnr").get<double>();
  if (!j.at("aggregate").at("lpips").is_null())
    r.mean_lpips = j.at("aggregate").at("lpips").get<double>();
  return r;
}

std::unique_ptr<LpipsBackbone> EvalConfig::make_backbone() const {
  if (lpips_mode == "none") return nullptr;
  if (lpips_mode == "random") return make_random_lpips_backbone(lpips_seed);
  if (lpips_mode == "external") {
    if (lpips_weights.empty())
      throw DataError("external LPIPS mode requested but no backbone weights were given");
    return load_lpips_backbone(lpips_weights);
  }
  throw ConfigError("unknown lpips mode: " + lpips_mode);
}

MetricsReport evaluate_pairs(
    const std::vector<std::tuple<std::string, const Image*, const Image*>>& pairs,
    const LpipsBackbone* backbone) {
  MetricsReport report;
  report.lpips_backbone = backbone ? backbone->id() : "none";
  for (const auto& [id, rec, gt] : pairs) {
    MetricRow row;
    row.id = id;
    row.ssim = ssim(*rec, *gt);
    row.psnr = psnr(*rec, *gt);
    if (backbone) row.lpips = lpips(*rec, *gt, *backbone);
    report.rows.push_back(std::move(row));
  }
  report.finalize();
  return report;
}

MetricsReport evaluate(const std::string& checkpoint_path, const DatasetManifest& dataset,
                       Split split, const EvalConfig& config) {
  auto records = dataset.split_records(split);
  if (records.empty())
    throw DataError("evaluate: split '" + split_name(split) + "' is empty in " + dataset.root);

  GeneratorSnapshot snap = load_generator_snapshot(checkpoint_path);
  auto backbone = config.make_backbone();

  std::vector<Image> recs, gts;
  std::vector<std::string> ids;
  recs.reserve(records.size());
  for (const DatasetRecord* rec : records) {
    FaceSample s = load_sample(dataset, *rec);
    Tensor x = Generator::make_input(s.occ, s.mask);
    Tensor raw = snap.generator->forward(x, snap.meta.model.attention);
    recs.push_back(composite(tensor_to_image(raw), s.occ, s.mask));
    gts.push_back(std::move(s.gt));
    ids.push_back(rec->gt_path);
  }
  std::vector<std::tuple<std::string, const Image*, const Image*>> pairs;
  for (std::size_t i = 0; i < recs.size(); ++i) pairs.emplace_back(ids[i], &recs[i], &gts[i]);

  MetricsReport report = evaluate_pairs(pairs, backbone.get());
  report.checkpoint_id = checkpoint_path + "#" + snap.meta.stage + "@" +
                         std::to_string(snap.meta.step);
  report.dataset_id = dataset.root + "#" + split_name(split);
  return report;
}

void save_ablation_report(const std::vector<AblationRow>& rows, const std::string& path) {
  json j;
  j["format"] = "deocclude-ablation-v1";
  j["columns"] = {"ssim", "psnr", "lpips"};
  j["rows"] = json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"label", r.label},
                         {"ssim", r.ssim},
                         {"psnr", r.psnr},
                         {"lpips", r.lpips ? json(*r.lpips) : json(nullptr)}});
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("failed to write ablation report " + path);
  f << j.dump(2) << "\n";
}

}  // namespace deoc
