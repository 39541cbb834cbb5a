#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace eetg {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream domains. Every random decision in a run is drawn from a stream keyed
// by (master seed, domain, counters), so results never depend on how work is
// scheduled across threads.
enum class Stream : std::uint64_t {
  QdInit = 1,
  QdBatch = 2,
  Rollout = 3,
  Terrain = 4,
  ArsDirections = 5,
  ArsTasks = 6,
  Cma = 7,
  CmaCells = 8,
  Evaluation = 9,
  PolicyInit = 10,
  Phase = 11,
};

inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(seed);
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, Stream domain, std::initializer_list<std::uint64_t> keys = {}) {
  std::uint64_t h = derive_seed(seed, {static_cast<std::uint64_t>(domain)});
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed, Stream domain, std::initializer_list<std::uint64_t> keys = {}) {
  return Rng(derive_seed(seed, domain, keys));
}

// Uniform in [0, 1) from a hash; used where a per-coordinate draw must be
// available without materialising a table (terrain tiles).
constexpr double hash_uniform(std::uint64_t key) {
  return static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-53;
}

}  // namespace eetg
