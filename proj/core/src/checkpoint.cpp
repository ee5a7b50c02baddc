#include "deocclude/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "deocclude/error.hpp"

using json = nlohmann::json;

namespace deoc {

namespace {

constexpr char kMagic[] = "DEOCCKPT";  // followed by a version character
constexpr char kVersion = '1';

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

json config_to_json(const ModelConfig& c) {
  return json{{"resolution", c.resolution},
              {"base_width", c.base_width},
              {"latent_dim", c.latent_dim},
              {"input_channels", c.input_channels},
              {"attention", c.attention},
              {"depth", c.depth},
              {"blocks_per_stage", c.blocks_per_stage},
              {"max_width_mult", c.max_width_mult},
              {"disc_base_width", c.disc_base_width}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.resolution = j.at("resolution").get<int>();
  c.base_width = j.at("base_width").get<int>();
  c.latent_dim = j.at("latent_dim").get<int>();
  c.input_channels = j.at("input_channels").get<int>();
  c.attention = j.at("attention").get<bool>();
  c.depth = j.at("depth").get<int>();
  c.blocks_per_stage = j.at("blocks_per_stage").get<int>();
  c.max_width_mult = j.at("max_width_mult").get<int>();
  c.disc_base_width = j.at("disc_base_width").get<int>();
  return c;
}

template <typename T>
void write_pod(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f, const std::string& path) {
  T v{};
  if (!f.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw CorruptFileError("checkpoint " + path + " is truncated");
  return v;
}

}  // namespace

void save_checkpoint_file(const std::string& path, const CheckpointMeta& meta,
                          const std::vector<std::pair<std::string, const Tensor*>>& arrays) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("failed to open " + path + " for writing");
  f.write(kMagic, sizeof(kMagic) - 1);
  f.put(kVersion);

  json j{{"stage", meta.stage},
         {"step", meta.step},
         {"seed", meta.seed},
         {"model", config_to_json(meta.model)},
         {"rng_state", meta.rng_state},
         {"pending_queue", meta.pending_queue},
         {"opt_g_updates", meta.opt_g_updates},
         {"opt_d_updates", meta.opt_d_updates},
         {"train_config", meta.train_config_json}};
  const std::string mj = j.dump();
  write_pod<std::uint64_t>(f, mj.size());
  f.write(mj.data(), static_cast<std::streamsize>(mj.size()));

  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, tensor] : arrays) {
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(tensor->rank()));
    for (int d : tensor->shape()) write_pod<std::int32_t>(f, d);
    f.write(reinterpret_cast<const char*>(tensor->data()),
            static_cast<std::streamsize>(tensor->size() * sizeof(float)));
  }
  if (!f) throw IoError("short write to " + path);
}

LoadedCheckpoint load_checkpoint_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("failed to open checkpoint " + path);

  char magic[sizeof(kMagic) - 1];
  if (!f.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw CorruptFileError(path + " is not a checkpoint file (bad magic)");
  const int version = f.get();
  if (version != kVersion)
    throw VersionError(path + " has unsupported checkpoint version '" +
                       std::string(1, static_cast<char>(version)) + "'");

  const auto meta_len = read_pod<std::uint64_t>(f, path);
  if (meta_len > (1ull << 30)) throw CorruptFileError(path + ": unreasonable metadata size");
  std::string mj(meta_len, '\0');
  if (!f.read(mj.data(), static_cast<std::streamsize>(meta_len)))
    throw CorruptFileError("checkpoint " + path + " is truncated in metadata");

  LoadedCheckpoint out;
  try {
    json j = json::parse(mj);
    out.meta.stage = j.at("stage").get<std::string>();
    out.meta.step = j.at("step").get<long>();
    out.meta.seed = j.at("seed").get<std::uint32_t>();
    out.meta.model = config_from_json(j.at("model"));
    out.meta.rng_state = j.value("rng_state", "");
    out.meta.pending_queue = j.value("pending_queue", std::vector<int>{});
    out.meta.opt_g_updates = j.value("opt_g_updates", 0L);
    out.meta.opt_d_updates = j.value("opt_d_updates", 0L);
    out.meta.train_config_json = j.value("train_config", "");
  } catch (const json::exception& e) {
    throw CorruptFileError("checkpoint " + path + " has malformed metadata: " + e.what());
  }

  const auto count = read_pod<std::uint32_t>(f, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(f, path);
    if (name_len > 4096) throw CorruptFileError(path + ": unreasonable array name length");
    std::string name(name_len, '\0');
    if (!f.read(name.data(), name_len))
      throw CorruptFileError("checkpoint " + path + " is truncated in array names");
    const auto rank = read_pod<std::uint32_t>(f, path);
    if (rank > 8) throw CorruptFileError(path + ": unreasonable array rank");
    std::vector<int> shape(rank);
    for (auto& d : shape) {
      d = read_pod<std::int32_t>(f, path);
      if (d < 0) throw CorruptFileError(path + ": negative array dimension");
    }
    Tensor t(shape);
    if (!f.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(float))))
      throw CorruptFileError("checkpoint " + path + " is truncated in array data");
    out.arrays.emplace(std::move(name), std::move(t));
  }
  return out;
}

GeneratorSnapshot load_generator_snapshot(const std::string& path) {
  LoadedCheckpoint ck = load_checkpoint_file(path);
  GeneratorSnapshot snap;
  snap.meta = ck.meta;
  snap.generator = std::make_unique<Generator>(ck.meta.model);
  for (auto& [name, param] : snap.generator->params().all()) {
    auto it = ck.arrays.find("g/" + name);
    if (it == ck.arrays.end())
      throw CorruptFileError("checkpoint " + path + " is missing generator array " + name);
    if (it->second.shape() != param.value.shape())
      throw ConfigError("checkpoint " + path + " array " + name +
                        " has a shape incompatible with its stored config");
    param.value = it->second;
  }
  return snap;
}

}  // namespace deoc
