#include "deocclude/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "deocclude/error.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace deoc {

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::pretrain: return "pretrain";
    case Stage::stage1: return "stage1";
    case Stage::stage2: return "stage2";
  }
  throw ConfigError("unknown stage value");
}

Stage parse_stage(const std::string& name) {
  if (name == "pretrain") return Stage::pretrain;
  if (name == "stage1") return Stage::stage1;
  if (name == "stage2") return Stage::stage2;
  throw ConfigError("unknown stage name: " + name);
}

Split stage_split(Stage s) {
  switch (s) {
    case Stage::pretrain: return Split::pretrain;
    case Stage::stage1: return Split::stage1;
    case Stage::stage2: return Split::stage2;
  }
  throw ConfigError("unknown stage value");
}

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("train: steps must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (lr_g < 0.0 || lr_d < 0.0) throw ConfigError("train: learning rates must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("train: moment decays must lie in [0, 1)");
  if (checkpoint_interval < 1) throw ConfigError("train: checkpoint_interval must be >= 1");
  weights.validate();
}

std::string TrainConfig::to_json() const {
  json j{{"stage", stage_name(stage)},
         {"steps", steps},
         {"batch_size", batch_size},
         {"lr_g", lr_g},
         {"lr_d", lr_d},
         {"beta1", beta1},
         {"beta2", beta2},
         {"seed", seed},
         {"checkpoint_interval", checkpoint_interval},
         {"weights",
          {{"rec", weights.rec}, {"adv", weights.adv}, {"ssim", weights.ssim}, {"mask", weights.mask}}}};
  return j.dump();
}

// ---------------------------------------------------------------------------
// Adam

void Adam::step(nn::ParamRegistry& params, const std::vector<std::string>& frozen,
                double grad_scale) {
  ++updates_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(updates_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(updates_));
  for (auto& [name, p] : params.all()) {
    bool skip = false;
    for (const auto& prefix : frozen) {
      if (name.rfind(prefix, 0) == 0) {
        skip = true;
        break;
      }
    }
    if (skip) continue;
    auto& [m, v] = moments_[name];
    if (m.empty()) {
      m = Tensor(p.value.shape());
      v = Tensor(p.value.shape());
    }
    const float lr = static_cast<float>(lr_);
    const float b1 = static_cast<float>(beta1_);
    const float b2 = static_cast<float>(beta2_);
    const float inv_bc1 = static_cast<float>(1.0 / bc1);
    const float inv_bc2 = static_cast<float>(1.0 / bc2);
    const float eps = static_cast<float>(eps_);
    const float scale = static_cast<float>(grad_scale);
    for (std::int64_t i = 0; i < p.value.size(); ++i) {
      const float g = p.grad[i] * scale;
      m[i] = b1 * m[i] + (1.0f - b1) * g;
      v[i] = b2 * v[i] + (1.0f - b2) * g * g;
      const float mhat = m[i] * inv_bc1;
      const float vhat = v[i] * inv_bc2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// TrainState construction and (de)serialization

TrainState make_train_state(const ModelConfig& model_config, const TrainConfig& cfg) {
  TrainState st;
  st.model_config = model_config;
  st.model_config.validate();
  st.generator = std::make_unique<Generator>(st.model_config);
  st.discriminator = std::make_unique<Discriminator>(st.model_config);
  st.rng = Rng(cfg.seed);
  st.generator->init_params(st.rng);
  st.discriminator->init_params(st.rng);
  st.opt_g = Adam(cfg.lr_g, cfg.beta1, cfg.beta2);
  st.opt_d = Adam(cfg.lr_d, cfg.beta1, cfg.beta2);
  st.stage = cfg.stage;
  st.seed = cfg.seed;
  st.train_config_json = cfg.to_json();
  return st;
}

void save_checkpoint(const TrainState& state, const std::string& path) {
  CheckpointMeta meta;
  meta.stage = stage_name(state.stage);
  meta.step = state.step;
  meta.seed = state.seed;
  meta.model = state.model_config;
  meta.model.attention = state.stage == Stage::stage2;
  meta.rng_state = state.rng.serialize();
  meta.pending_queue = state.pending;
  meta.opt_g_updates = state.opt_g.updates();
  meta.opt_d_updates = state.opt_d.updates();
  meta.train_config_json = state.train_config_json;

  std::vector<std::pair<std::string, const Tensor*>> arrays;
  for (const auto& [name, p] : state.generator->params().all())
    arrays.emplace_back("g/" + name, &p.value);
  for (const auto& [name, p] : state.discriminator->params().all())
    arrays.emplace_back("d/" + name, &p.value);
  for (const auto& [name, mv] : state.opt_g.moments()) {
    arrays.emplace_back("mg/" + name, &mv.first);
    arrays.emplace_back("vg/" + name, &mv.second);
  }
  for (const auto& [name, mv] : state.opt_d.moments()) {
    arrays.emplace_back("md/" + name, &mv.first);
    arrays.emplace_back("vd/" + name, &mv.second);
  }
  save_checkpoint_file(path, meta, arrays);
}

namespace {

void fill_params_from(const std::map<std::string, Tensor>& arrays, const std::string& prefix,
                      nn::ParamRegistry& reg, const std::string& path) {
  for (auto& [name, p] : reg.all()) {
    auto it = arrays.find(prefix + name);
    if (it == arrays.end())
      throw CorruptFileError("checkpoint " + path + " is missing array " + prefix + name);
    if (it->second.shape() != p.value.shape())
      throw ConfigError("checkpoint " + path + " array " + prefix + name +
                        " does not match the model configuration");
    p.value = it->second;
  }
}

}  // namespace

TrainState load_checkpoint(const std::string& path) {
  LoadedCheckpoint ck = load_checkpoint_file(path);
  TrainState st;
  st.model_config = ck.meta.model;
  st.generator = std::make_unique<Generator>(st.model_config);
  st.discriminator = std::make_unique<Discriminator>(st.model_config);
  fill_params_from(ck.arrays, "g/", st.generator->params(), path);
  fill_params_from(ck.arrays, "d/", st.discriminator->params(), path);

  TrainConfig cfg;
  if (!ck.meta.train_config_json.empty()) {
    try {
      json j = json::parse(ck.meta.train_config_json);
      cfg.lr_g = j.value("lr_g", cfg.lr_g);
      cfg.lr_d = j.value("lr_d", cfg.lr_d);
      cfg.beta1 = j.value("beta1", cfg.beta1);
      cfg.beta2 = j.value("beta2", cfg.beta2);
    } catch (const json::exception&) {
      // keep defaults; the caller's config re-validates
    }
  }
  st.opt_g = Adam(cfg.lr_g, cfg.beta1, cfg.beta2);
  st.opt_d = Adam(cfg.lr_d, cfg.beta1, cfg.beta2);
  for (const auto& [name, t] : ck.arrays) {
    if (name.rfind("mg/", 0) == 0) st.opt_g.moments()[name.substr(3)].first = t;
    if (name.rfind("vg/", 0) == 0) st.opt_g.moments()[name.substr(3)].second = t;
    if (name.rfind("md/", 0) == 0) st.opt_d.moments()[name.substr(3)].first = t;
    if (name.rfind("vd/", 0) == 0) st.opt_d.moments()[name.substr(3)].second = t;
  }
  st.opt_g.restore(ck.meta.opt_g_updates);
  st.opt_d.restore(ck.meta.opt_d_updates);
  st.step = ck.meta.step;
  st.seed = ck.meta.seed;
  st.stage = parse_stage(ck.meta.stage);
  st.pending = ck.meta.pending_queue;
  st.train_config_json = ck.meta.train_config_json;
  if (!ck.meta.rng_state.empty()) st.rng = Rng::deserialize(ck.meta.rng_state);
  return st;
}

// ---------------------------------------------------------------------------
// train_step

namespace {

/// Adds a double HWC gradient field into a CHW float tensor with a scale.
void add_grad_hwc(const std::vector<double>& g, double scale, Tensor& chw) {
  const int h = chw.dim(1), w = chw.dim(2);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  for (std::int64_t p = 0; p < plane; ++p) {
    chw[p] += static_cast<float>(g[p * 3 + 0] * scale);
    chw[plane + p] += static_cast<float>(g[p * 3 + 1] * scale);
    chw[2 * plane + p] += static_cast<float>(g[p * 3 + 2] * scale);
  }
}

}  // namespace

LossReport train_step(TrainState& state, const std::vector<const FaceSample*>& batch,
                      const TrainConfig& cfg) {
  if (batch.empty()) throw DataError("train_step: empty batch");
  const bool use_attention = cfg.attention_active();
  const bool use_adv = cfg.weights.adv > 0.0;
  const bool stage1 = cfg.stage == Stage::stage1;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const int res = state.model_config.resolution;
  Generator& gen = *state.generator;
  Discriminator& disc = *state.discriminator;

  auto stage_inputs = [&](const FaceSample& s) -> std::pair<const Image*, BinaryMask> {
    if (stage1) return {&s.gt, BinaryMask(res, res, 0.0f)};
    return {&s.occ, s.mask};
  };

  LossReport report;

  // --- Discriminator update on X_gt vs the (detached) reconstructions.
  std::vector<Image> recs(batch.size());
  if (use_adv) {
    disc.params().zero_grads();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const FaceSample& s = *batch[i];
      auto [input_img, mask_eff] = stage_inputs(s);
      Tensor x = Generator::make_input(*input_img, mask_eff);
      Tensor raw = gen.forward(x, use_attention);
      Image raw_img = tensor_to_image(raw);
      recs[i] = stage1 ? std::move(raw_img) : composite(raw_img, s.occ, s.mask);

      const double d_real = disc.discriminate(s.gt);
      disc.backward((d_real - 1.0) * inv_b, /*param_grads=*/true, /*input_grad=*/false);
      const double d_fake = disc.discriminate(recs[i]);
      disc.backward(d_fake * inv_b, /*param_grads=*/true, /*input_grad=*/false);
      report.l_adv_d += adversarial_losses(d_real, d_fake).first * inv_b;
    }
    if (!std::isfinite(report.l_adv_d))
      throw NumericError("non-finite loss term: l_adv_d");
    state.opt_d.step(disc.params(), {}, 1.0);
  }

  // --- Generator update on the weighted objective.
  gen.params().zero_grads();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const FaceSample& s = *batch[i];
    auto [input_img, mask_eff] = stage_inputs(s);
    Tensor x = Generator::make_input(*input_img, mask_eff);
    Tensor raw = gen.forward(x, use_attention);
    Image raw_img = tensor_to_image(raw);
    Image rec = stage1 ? raw_img : composite(raw_img, s.occ, s.mask);

    const double l_rec = l1_loss(rec, s.gt);
    const double l_ssim = ssim_loss(rec, s.gt);
    const double l_mask = stage1 ? 0.0 : mask_loss(rec, s.gt, s.mask);
    report.l_rec += l_rec * inv_b;
    report.l_ssim += l_ssim * inv_b;
    report.l_mask += l_mask * inv_b;

    Tensor d_rec({3, res, res});
    if (cfg.weights.rec > 0.0) add_grad_hwc(l1_loss_grad(rec, s.gt), cfg.weights.rec * inv_b, d_rec);
    if (cfg.weights.ssim > 0.0)
      add_grad_hwc(ssim_loss_grad(rec, s.gt), cfg.weights.ssim * inv_b, d_rec);
    if (!stage1 && cfg.weights.mask > 0.0)
      add_grad_hwc(mask_loss_grad(rec, s.gt, s.mask), cfg.weights.mask * inv_b, d_rec);

    if (use_adv) {
      const double d_fake = disc.discriminate(rec);
      report.l_adv_g += -std::log(std::clamp(d_fake, 1e-7, 1.0 - 1e-7)) * inv_b;
      Tensor d_from_disc =
          disc.backward((d_fake - 1.0) * cfg.weights.adv * inv_b, /*param_grads=*/false,
                        /*input_grad=*/true);
      for (std::int64_t k = 0; k < d_rec.size(); ++k) d_rec[k] += d_from_disc[k];
    }

    // Through the compositing rule: only masked pixels reach the raw output.
    if (!stage1) {
      const std::int64_t plane = static_cast<std::int64_t>(res) * res;
      for (std::int64_t p = 0; p < plane; ++p) {
        const float m = s.mask.values[static_cast<std::size_t>(p)];
        d_rec[p] *= m;
        d_rec[plane + p] *= m;
        d_rec[2 * plane + p] *= m;
      }
    }
    gen.backward(d_rec, /*param_grads=*/true, /*input_grad=*/false);
  }
  std::vector<std::string> frozen;
  if (!use_attention) frozen.push_back("attn.");
  state.opt_g.step(gen.params(), frozen, 1.0);

  report.step = ++state.step;
  report.l_final = total_loss(report, cfg.weights);  // throws NumericError on NaN/Inf
  return report;
}

// ---------------------------------------------------------------------------
// Stage runners

namespace {

struct LoadedSplit {
  std::vector<FaceSample> samples;
};

LoadedSplit load_split(const DatasetManifest& manifest, Split split) {
  LoadedSplit out;
  for (const DatasetRecord* rec : manifest.split_records(split)) {
    FaceSample s = load_sample(manifest, *rec);
    validate_sample(s, manifest.fill);
    out.samples.push_back(std::move(s));
  }
  if (out.samples.empty())
    throw DataError("split '" + split_name(split) + "' is empty in dataset " + manifest.root);
  return out;
}

void refill_queue(TrainState& state, int n) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  state.rng.shuffle(perm);
  state.pending.insert(state.pending.end(), perm.begin(), perm.end());
}

RunResult run_stage_impl(const DatasetManifest& dataset, TrainConfig cfg,
                         const ModelConfig* fresh_model_config,
                         const std::string& init_checkpoint, const std::string& run_dir) {
  cfg.validate();
  LoadedSplit split = load_split(dataset, stage_split(cfg.stage));

  TrainState state;
  if (init_checkpoint.empty()) {
    if (!fresh_model_config)
      throw ConfigError("a model configuration is required to train from scratch");
    state = make_train_state(*fresh_model_config, cfg);
  } else {
    TrainState loaded = load_checkpoint(init_checkpoint);
    const Stage init_stage = loaded.stage;
    if (init_stage == cfg.stage) {
      // Resume: continue with the serialized optimizer/RNG state.
      state = std::move(loaded);
      state.train_config_json = cfg.to_json();
    } else {
      const bool order_ok = (cfg.stage == Stage::stage1 && init_stage == Stage::pretrain) ||
                            (cfg.stage == Stage::stage2 && init_stage == Stage::stage1);
      if (!order_ok)
        throw StageOrderError("stage " + stage_name(cfg.stage) + " cannot start from a " +
                              stage_name(init_stage) + " checkpoint");
      // Fresh stage: keep the parameters, reset optimizer, counters and RNG.
      state.model_config = loaded.model_config;
      state.generator = std::move(loaded.generator);
      state.discriminator = std::move(loaded.discriminator);
      state.opt_g = Adam(cfg.lr_g, cfg.beta1, cfg.beta2);
      state.opt_d = Adam(cfg.lr_d, cfg.beta1, cfg.beta2);
      state.rng = Rng(cfg.seed);
      state.stage = cfg.stage;
      state.seed = cfg.seed;
      state.train_config_json = cfg.to_json();
    }
    if (fresh_model_config && !state.model_config.structurally_equal(*fresh_model_config))
      throw ConfigError("checkpoint " + init_checkpoint +
                        " was trained with an incompatible model configuration");
  }

  if (state.step >= cfg.steps) {
    throw ConfigError("checkpoint already has " + std::to_string(state.step) +
                      " steps; requested total is " + std::to_string(cfg.steps));
  }

  fs::create_directories(run_dir);
  const fs::path ckpt_dir = fs::path(run_dir) / "checkpoints";
  fs::create_directories(ckpt_dir);
  std::ofstream log(fs::path(run_dir) / "train.log", std::ios::app);
  if (!log) throw IoError("failed to open training log in " + run_dir);
  log << "{\"type\":\"config\",\"train\":" << cfg.to_json() << "}\n";

  RunResult result;
  std::string last_checkpoint;
  const int n = static_cast<int>(split.samples.size());

  auto write_checkpoint = [&](long step, bool final) {
    std::ostringstream name;
    name << "ckpt_" << stage_name(cfg.stage) << "_";
    if (final)
      name << "final";
    else
      name << std::setw(6) << std::setfill('0') << step;
    name << ".ckpt";
    const std::string path = (ckpt_dir / name.str()).string();
    save_checkpoint(state, path);
    last_checkpoint = path;
    return path;
  };

  while (state.step < cfg.steps) {
    std::vector<const FaceSample*> batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (state.pending.empty()) refill_queue(state, n);
      const int idx = state.pending.back();
      state.pending.pop_back();
      batch.push_back(&split.samples[static_cast<std::size_t>(idx)]);
    }
    LossReport report;
    try {
      report = train_step(state, batch, cfg);
    } catch (const NumericError& e) {
      throw TrainAbortError(std::string(e.what()) + " at step " +
                                std::to_string(state.step + 1) +
                                (last_checkpoint.empty() ? " (no checkpoint written yet)"
                                                         : "; last good checkpoint: " + last_checkpoint),
                            last_checkpoint);
    }
    log << report.to_log_line() << "\n";
    result.trace.push_back(report);
    if (state.step % cfg.checkpoint_interval == 0 && state.step < cfg.steps)
      write_checkpoint(state.step, false);
  }
  log.flush();
  result.final_checkpoint = write_checkpoint(state.step, true);
  return result;
}

}  // namespace

RunResult run_pretrain(const DatasetManifest& dataset, const TrainConfig& cfg,
                       const ModelConfig& model_config, const std::string& run_dir) {
  if (cfg.stage != Stage::pretrain) throw ConfigError("run_pretrain: config stage must be pretrain");
  return run_stage_impl(dataset, cfg, &model_config, "", run_dir);
}

RunResult run_stage1(const DatasetManifest& dataset, const TrainConfig& cfg,
                     const std::string& init_checkpoint, const std::string& run_dir) {
  if (cfg.stage != Stage::stage1) throw ConfigError("run_stage1: config stage must be stage1");
  if (init_checkpoint.empty()) throw ConfigError("run_stage1: an init checkpoint is required");
  return run_stage_impl(dataset, cfg, nullptr, init_checkpoint, run_dir);
}

RunResult run_stage2(const DatasetManifest& dataset, const TrainConfig& cfg,
                     const std::string& init_checkpoint, const std::string& run_dir) {
  if (cfg.stage != Stage::stage2) throw ConfigError("run_stage2: config stage must be stage2");
  if (init_checkpoint.empty()) throw ConfigError("run_stage2: an init checkpoint is required");
  return run_stage_impl(dataset, cfg, nullptr, init_checkpoint, run_dir);
}

// ---------------------------------------------------------------------------
// Architecture self-check

std::vector<std::string> find_dead_parameters(const ModelConfig& config, std::uint32_t seed) {
  Rng rng(seed);
  Generator gen(config);
  gen.init_params(rng);
  // Randomize the attention logit conv as well: the zero start is a training
  // choice, not part of the wiring being checked here.
  for (auto& [name, p] : gen.params().all()) {
    if (name.rfind("attn.conv2", 0) == 0) {
      for (std::int64_t i = 0; i < p.value.size(); ++i)
        p.value[i] = 0.1f * static_cast<float>(rng.gaussian());
    }
  }
  Discriminator disc(config);
  disc.init_params(rng);

  const int res = config.resolution;
  Image gt(res, res), occ_src(res, res);
  for (std::size_t i = 0; i < gt.rgb.size(); ++i) gt.rgb[i] = static_cast<float>(rng.uniform01());
  BinaryMask mask(res, res);
  for (int y = res / 4; y < res / 2; ++y)
    for (int x = res / 4; x < 3 * res / 4; ++x) mask.at(y, x) = 1.0f;
  Image occ = apply_mask(gt, mask, 0.0f);

  gen.params().zero_grads();
  disc.params().zero_grads();

  Tensor x = Generator::make_input(occ, mask);
  Tensor raw = gen.forward(x, /*use_attention=*/true);
  Image raw_img = tensor_to_image(raw);
  Image rec = composite(raw_img, occ, mask);

  LossWeights w;
  w.rec = w.adv = w.ssim = w.mask = 1.0;
  Tensor d_rec({3, res, res});
  add_grad_hwc(l1_loss_grad(rec, gt), w.rec, d_rec);
  add_grad_hwc(ssim_loss_grad(rec, gt), w.ssim, d_rec);
  add_grad_hwc(mask_loss_grad(rec, gt, mask), w.mask, d_rec);
  const double d_fake = disc.discriminate(rec);
  Tensor d_from_disc = disc.backward((d_fake - 1.0) * w.adv, false, true);
  for (std::int64_t k = 0; k < d_rec.size(); ++k) d_rec[k] += d_from_disc[k];
  const std::int64_t plane = static_cast<std::int64_t>(res) * res;
  for (std::int64_t p = 0; p < plane; ++p) {
    const float m = mask.values[static_cast<std::size_t>(p)];
    d_rec[p] *= m;
    d_rec[plane + p] *= m;
    d_rec[2 * plane + p] *= m;
  }
  gen.backward(d_rec, true, false);

  // Discriminator gradients come from its own objective.
  const double d_real_score = disc.discriminate(gt);
  disc.backward(d_real_score - 1.0, true, false);
  const double d_fake_score = disc.discriminate(rec);
  disc.backward(d_fake_score, true, false);

  std::vector<std::string> dead;
  auto scan = [&dead](const nn::ParamRegistry& reg, const std::string& prefix) {
    for (const auto& [name, p] : reg.all()) {
      bool nonzero = false;
      for (std::int64_t i = 0; i < p.grad.size(); ++i) {
        if (p.grad[i] != 0.0f) {
          nonzero = true;
          break;
        }
      }
      if (!nonzero) dead.push_back(prefix + name);
    }
  };
  scan(gen.params(), "g/");
  scan(disc.params(), "d/");
  return dead;
}

}  // namespace deoc
