#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deocclude/model.hpp"
#include "deocclude/tensor.hpp"

namespace deoc {

/// Metadata record carried by every checkpoint file.
struct CheckpointMeta {
  std::string stage;  // "pretrain" | "stage1" | "stage2"
  long step = 0;
  std::uint32_t seed = 0;
  ModelConfig model;
  // Training-state extras (empty for pure parameter snapshots).
  std::string rng_state;
  std::vector<int> pending_queue;
  long opt_g_updates = 0;
  long opt_d_updates = 0;
  // Free-form config snapshot (JSON text) echoed for provenance.
  std::string train_config_json;
};

/// Container layout: magic string "DEOCCKPT1", a JSON metadata block, then
/// named arrays as (name, dims, raw little-endian f32 data). Truncated or
/// malformed files raise CorruptFileError; a foreign version raises
/// VersionError.
void save_checkpoint_file(const std::string& path, const CheckpointMeta& meta,
                          const std::vector<std::pair<std::string, const Tensor*>>& arrays);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::map<std::string, Tensor> arrays;
};

LoadedCheckpoint load_checkpoint_file(const std::string& path);

/// Parameter-only view for inference: rebuilds the generator from the stored
/// config and weights.
struct GeneratorSnapshot {
  CheckpointMeta meta;
  std::unique_ptr<Generator> generator;
};

GeneratorSnapshot load_generator_snapshot(const std::string& path);

}  // namespace deoc
