#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace deoc {

/// Seeded random source. The engine is std::mt19937 (its output sequence is
/// fixed by the standard); all value mappings are done by hand so that the
/// sampled streams do not depend on the standard library's distribution
/// implementations. State round-trips through a string for checkpointing.
class Rng {
 public:
  explicit Rng(std::uint32_t seed = 0) : engine_(seed) {}

  std::uint32_t next_u32() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform01() { return next_u32() * (1.0 / 4294967296.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased integer in [0, n), n >= 1. Rejection sampling.
  std::uint32_t below(std::uint32_t n);

  /// Standard normal via Box-Muller (the sine partner is discarded so the
  /// only state is the engine itself).
  double gaussian();

  /// In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(static_cast<std::uint32_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::string serialize() const;
  static Rng deserialize(const std::string& state);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937 engine_;
};

/// Stable 64-bit mix of a string and a salt; used to derive independent
/// per-item seeds (e.g. per-frame mask jitter) from one dataset seed.
std::uint64_t hash_seed(const std::string& key, std::uint64_t salt);

}  // namespace deoc
