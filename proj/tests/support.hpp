#pragma once

// Hand-rolled generators and scratch helpers shared by the test binaries.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "eetg/bench.hpp"
#include "eetg/tg.hpp"

namespace eetg::fixtures {

// Uniform TGParams with a bias toward the box edges, where clamps and branch
// boundaries live.
inline TGParams random_tg(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto lo = TGParams::lower();
  const auto w = TGParams::width();
  TGParams::Vector v{};
  for (int i = 0; i < kNumTGParams; ++i) {
    const double r = u(rng);
    double t = u(rng);
    if (r < 0.05) t = 0.0;
    else if (r < 0.10) t = 1.0;
    v[i] = lo[i] + t * w[i];
  }
  return clamp(TGParams::from_vector(v));
}

inline Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("eetg_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Small, fast experiment: short episodes and a tiny budget.
inline ExperimentConfig tiny_config(Variant v, std::uint64_t seed = 3, double scale = 0.0005) {
  ExperimentConfig c;
  c.variant = v;
  c.master_seed = seed;
  c.scale_factor = scale;
  c.sim.max_episode_s = 2.0;
  c.eval.reps = 2;
  c.ars.directions = 8;
  c.ars.top = 4;
  return c;
}

}  // namespace eetg::fixtures
