#include "deocclude/rng.hpp"

#include <cmath>
#include <sstream>

namespace deoc {

std::uint32_t Rng::below(std::uint32_t n) {
  if (n <= 1) return 0;
  const std::uint32_t limit = 0xFFFFFFFFu - (0xFFFFFFFFu % n);
  std::uint32_t x = next_u32();
  while (x >= limit) x = next_u32();
  return x % n;
}

double Rng::gaussian() {
  const double u1 = (next_u32() + 0.5) * (1.0 / 4294967296.0);
  const double u2 = next_u32() * (1.0 / 4294967296.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

Rng Rng::deserialize(const std::string& state) {
  Rng r;
  std::istringstream is(state);
  is >> r.engine_;
  return r;
}

std::uint64_t hash_seed(const std::string& key, std::uint64_t salt) {
  // FNV-1a over the key, then a splitmix64 finalizer with the salt folded in.
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ull;
  }
  h += salt * 0x9E3779B97F4A7C15ull;
  h ^= h >> 30;
  h *= 0xBF58476D1CE4E5B9ull;
  h ^= h >> 27;
  h *= 0x94D049BB133111EBull;
  h ^= h >> 31;
  return h;
}

}  // namespace deoc
