#pragma once

// The 4 x 20 environment grid and the procedural terrains built from it.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include "eetg/rng.hpp"

namespace eetg {

enum class EnvType : int { Slope = 0, Stairs = 1, Uneven = 2, Beam = 3 };

inline constexpr int kNumEnvTypes = 4;
inline constexpr int kNumVariations = 20;
inline constexpr int kNumCells = kNumEnvTypes * kNumVariations;

inline constexpr std::array<EnvType, kNumEnvTypes> kEnvTypes{EnvType::Slope, EnvType::Stairs, EnvType::Uneven,
                                                             EnvType::Beam};

inline const char* env_type_name(EnvType t) {
  switch (t) {
    case EnvType::Slope: return "Slope";
    case EnvType::Stairs: return "Stairs";
    case EnvType::Uneven: return "Uneven";
    case EnvType::Beam: return "Beam";
  }
  return "?";
}

inline EnvType parse_env_type(std::string_view name) {
  auto lower = [](std::string_view v) {
    std::string r(v);
    for (auto& c : r) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return r;
  };
  for (auto t : kEnvTypes)
    if (lower(name) == lower(env_type_name(t))) return t;
  throw std::invalid_argument("unknown environment type '" + std::string(name) + "'");
}

struct ParamRange {
  double lo;
  double hi;
  double width() const { return hi - lo; }
};

// Slope in degrees, stairs step height and uneven max height in metres,
// beam width in metres.
inline ParamRange param_range(EnvType t) {
  switch (t) {
    case EnvType::Slope: return {-11.5, 11.5};
    case EnvType::Stairs: return {-0.1, 0.1};
    case EnvType::Uneven: return {-0.1, 0.1};
    case EnvType::Beam: return {0.25, 0.75};
  }
  throw std::invalid_argument("unknown environment type");
}

inline double cell_param(EnvType t, int variation) {
  if (variation < 0 || variation >= kNumVariations)
    throw std::out_of_range("variation index " + std::to_string(variation) + " outside [0, 19]");
  const auto r = param_range(t);
  if (variation == kNumVariations - 1) return r.hi;
  return r.lo + variation * (r.width() / (kNumVariations - 1));
}

struct EnvCell {
  EnvType type = EnvType::Slope;
  int variation = 0;
  double param = 0.0;

  int index() const { return static_cast<int>(type) * kNumVariations + variation; }
  friend bool operator==(const EnvCell&, const EnvCell&) = default;
};

inline EnvCell make_cell(EnvType t, int variation) { return {t, variation, cell_param(t, variation)}; }

inline EnvCell cell_from_index(int index) {
  if (index < 0 || index >= kNumCells) throw std::out_of_range("cell index " + std::to_string(index));
  return make_cell(static_cast<EnvType>(index / kNumVariations), index % kNumVariations);
}

struct EnvGrid {
  std::array<EnvCell, kNumCells> cells;

  static EnvGrid standard() {
    EnvGrid g;
    for (int i = 0; i < kNumCells; ++i) g.cells[i] = cell_from_index(i);
    return g;
  }
  const EnvCell& at(EnvType t, int variation) const {
    if (variation < 0 || variation >= kNumVariations) throw std::out_of_range("variation index");
    return cells[static_cast<int>(t) * kNumVariations + variation];
  }
};

struct TerrainConfig {
  double onset_x = 0.5;             // everything behind this is a flat spawn pad
  double stair_depth = 0.25;
  double tile_size = 0.25;
  double unsupported_height = -1.0;  // ground level reported beside a beam
  std::uint64_t layout_seed = 0x5eed;  // uneven tile layouts, one per cell
};

class Terrain {
 public:
  Terrain(EnvType type, double param, std::uint64_t seed, TerrainConfig cfg = {})
      : type_(type), param_(param), seed_(seed), cfg_(cfg), slope_(std::tan(param * std::numbers::pi / 180.0)) {}

  EnvType type() const { return type_; }
  double param() const { return param_; }
  std::uint64_t seed() const { return seed_; }
  const TerrainConfig& config() const { return cfg_; }

  // Exact piecewise height, or nullopt where there is no ground.
  std::optional<double> height_at(double x, double y) const {
    if (x < cfg_.onset_x) return 0.0;
    const double dx = x - cfg_.onset_x;
    switch (type_) {
      case EnvType::Slope: return slope_ * dx;
      case EnvType::Stairs: return std::floor(dx / cfg_.stair_depth) * param_;
      case EnvType::Uneven: {
        const auto ix = static_cast<std::int64_t>(std::floor(dx / cfg_.tile_size));
        const auto iy = static_cast<std::int64_t>(std::floor(y / cfg_.tile_size));
        return tile_height(ix, iy);
      }
      case EnvType::Beam:
        if (std::abs(y) <= 0.5 * param_) return 0.0;
        return std::nullopt;
    }
    return 0.0;
  }

  double ground_height(double x, double y) const { return height_at(x, y).value_or(cfg_.unsupported_height); }

  // Height of an uneven-terrain tile; tile (0, 0) starts at the onset line
  // and y = 0.
  double tile_height(std::int64_t ix, std::int64_t iy) const {
    const std::uint64_t key = derive_seed(seed_, Stream::Terrain,
                                          {static_cast<std::uint64_t>(ix), static_cast<std::uint64_t>(iy)});
    return hash_uniform(key) * param_;
  }

 private:
  EnvType type_;
  double param_;
  std::uint64_t seed_;
  TerrainConfig cfg_;
  double slope_;
};

// Perturbs the cell parameter by N(0, (noise_std * range width)^2), clamps it
// to the type's range and builds the terrain. The rollout seed only drives the
// parameter noise; the tile layout belongs to the cell, so a noiseless cell is
// the same terrain every time.
inline Terrain build_terrain(const EnvCell& cell, double param_noise_std, std::uint64_t seed,
                             const TerrainConfig& cfg = {}) {
  if (param_noise_std < 0.0) throw std::invalid_argument("param_noise_std must be non-negative");
  const auto range = param_range(cell.type);
  double p = cell.param;
  if (param_noise_std > 0.0) {
    Rng rng(derive_seed(seed, Stream::Terrain, {0xfeedULL}));
    std::normal_distribution<double> noise(0.0, param_noise_std * range.width());
    p = std::clamp(p + noise(rng), range.lo, range.hi);
  }
  return Terrain(cell.type, p, derive_seed(cfg.layout_seed, Stream::Terrain, {static_cast<std::uint64_t>(cell.index())}),
                 cfg);
}

}  // namespace eetg
