#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "deocclude/checkpoint.hpp"
#include "deocclude/dataset.hpp"
#include "deocclude/losses.hpp"
#include "deocclude/model.hpp"
#include "deocclude/rng.hpp"

namespace deoc {

enum class Stage { pretrain, stage1, stage2 };

std::string stage_name(Stage s);
Stage parse_stage(const std::string& name);
Split stage_split(Stage s);

struct TrainConfig {
  Stage stage = Stage::pretrain;
  long steps = 200;
  int batch_size = 4;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  LossWeights weights;
  std::uint32_t seed = 0;
  long checkpoint_interval = 100;

  /// The attention module runs (and trains) in stage2 only.
  bool attention_active() const { return stage == Stage::stage2; }

  void validate() const;
  std::string to_json() const;
};

/// Adam with per-array moment buffers, keyed like the parameter registry.
class Adam {
 public:
  Adam() = default;
  Adam(double lr, double beta1, double beta2) : lr_(lr), beta1_(beta1), beta2_(beta2) {}

  /// Applies one update from the accumulated gradients scaled by
  /// `grad_scale`. Parameters whose name starts with any prefix in `frozen`
  /// are skipped entirely.
  void step(nn::ParamRegistry& params, const std::vector<std::string>& frozen,
            double grad_scale);

  long updates() const { return updates_; }

  // Serialization access for checkpointing.
  std::map<std::string, std::pair<Tensor, Tensor>>& moments() { return moments_; }
  const std::map<std::string, std::pair<Tensor, Tensor>>& moments() const { return moments_; }
  void restore(long updates) { updates_ = updates; }

 private:
  double lr_ = 2e-4;
  double beta1_ = 0.5;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long updates_ = 0;
  std::map<std::string, std::pair<Tensor, Tensor>> moments_;  // name -> (m, v)
};

/// Full mutable training state: networks, optimizer moments, step counter,
/// RNG and the pending shuffled-index queue. Serializable via the
/// checkpoint container; loading reproduces forward passes bit-exactly.
struct TrainState {
  ModelConfig model_config;
  std::unique_ptr<Generator> generator;
  std::unique_ptr<Discriminator> discriminator;
  Adam opt_g;
  Adam opt_d;
  long step = 0;
  Rng rng;
  std::vector<int> pending;  // shuffled sample indices not yet consumed
  Stage stage = Stage::pretrain;
  std::uint32_t seed = 0;
  std::string train_config_json;
};

/// Fresh state with seeded parameter init.
TrainState make_train_state(const ModelConfig& model_config, const TrainConfig& cfg);

void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

/// One alternating update: a discriminator step on (X_gt vs composited
/// X_rec), then a generator step on the weighted objective. The batch must
/// be non-empty and valid. Stage recipes:
///   pretrain/stage2: input = (occ, mask), losses on the composite.
///   stage1: input = (gt, empty mask), losses on the raw reconstruction.
LossReport train_step(TrainState& state, const std::vector<const FaceSample*>& batch,
                      const TrainConfig& cfg);

struct RunResult {
  std::string final_checkpoint;
  std::vector<LossReport> trace;
};

/// Step-count-based loops with seeded shuffling; one structured-text log
/// line per step into <run_dir>/train.log (config echoed on the first
/// line); periodic checkpoints into <run_dir>/checkpoints. A non-finite
/// loss aborts with a TrainAbortError carrying the last good checkpoint.
RunResult run_pretrain(const DatasetManifest& dataset, const TrainConfig& cfg,
                       const ModelConfig& model_config, const std::string& run_dir);

/// Fine-tunes from a pretrain (or stage1, when resuming) checkpoint on the
/// person's unoccluded images as identity reconstruction.
RunResult run_stage1(const DatasetManifest& dataset, const TrainConfig& cfg,
                     const std::string& init_checkpoint, const std::string& run_dir);

/// Trains attention jointly with everything else on occluded samples,
/// starting from a stage1 (or stage2, when resuming) checkpoint.
RunResult run_stage2(const DatasetManifest& dataset, const TrainConfig& cfg,
                     const std::string& init_checkpoint, const std::string& run_dir);

/// Architecture self-check on a (typically tiny) config: random params
/// everywhere (attention logits included), one synthetic batch through the
/// full objective, returns names of parameters with all-zero gradients.
std::vector<std::string> find_dead_parameters(const ModelConfig& config, std::uint32_t seed);

}  // namespace deoc
