#pragma once

// Multi-task MAP-Elites over the environment grid: each cell is an
// environment and keeps the best trajectory generator evaluated in it.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "eetg/parallel.hpp"
#include "eetg/rng.hpp"
#include "eetg/terrain.hpp"
#include "eetg/tg.hpp"

namespace eetg {

struct Elite {
  TGParams tg;
  double fitness = 0.0;
  long added_at_eval = 0;

  friend bool operator==(const Elite&, const Elite&) = default;
};

struct Archive {
  std::array<std::optional<Elite>, kNumCells> cells{};
  long evaluations = 0;

  int coverage() const {
    return static_cast<int>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.has_value(); }));
  }
  std::vector<int> filled() const {
    std::vector<int> out;
    for (int i = 0; i < kNumCells; ++i)
      if (cells[i]) out.push_back(i);
    return out;
  }
  const std::optional<Elite>& at(const EnvCell& c) const { return cells[c.index()]; }

  friend bool operator==(const Archive&, const Archive&) = default;
};

struct QDConfig {
  long total_evals = 3840;
  double init_fraction = 0.10;
  double p_same_type = 0.7;
  double iso_sigma = 0.01;
  double line_sigma = 0.2;
  int batch_size = 64;
  double eval_noise_std = 0.05;  // environment-parameter noise during TG evaluation
  std::uint64_t master_seed = 1;
};

enum class InsertOutcome { Inserted, Replaced, Rejected };

inline InsertOutcome try_insert(Archive& archive, const EnvCell& cell, const TGParams& tg, double fitness) {
  if (!std::isfinite(fitness)) return InsertOutcome::Rejected;
  auto& slot = archive.cells[cell.index()];
  if (!slot) {
    slot = Elite{tg, fitness, archive.evaluations};
    return InsertOutcome::Inserted;
  }
  if (fitness > slot->fitness) {
    *slot = Elite{tg, fitness, archive.evaluations};
    return InsertOutcome::Replaced;
  }
  return InsertOutcome::Rejected;
}

inline TGParams sample_uniform_tg(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto lo = TGParams::lower();
  const auto w = TGParams::width();
  TGParams::Vector v{};
  for (int i = 0; i < kNumTGParams; ++i) v[i] = lo[i] + u(rng) * w[i];
  return clamp(TGParams::from_vector(v));
}

struct Selection {
  int parent_cell;
  EnvCell target;
};

// Parent uniform over filled cells; target type equals the parent's with
// probability p_same_type, otherwise one of the other three uniformly;
// target variation uniform.
inline Selection select(const Archive& archive, Rng& rng, double p_same_type = 0.7) {
  const auto filled = archive.filled();
  if (filled.empty()) throw std::runtime_error("select: archive is empty");
  std::uniform_int_distribution<std::size_t> pick(0, filled.size() - 1);
  const int parent = filled[pick(rng)];
  const int parent_type = parent / kNumVariations;

  std::uniform_real_distribution<double> u(0.0, 1.0);
  int type = parent_type;
  if (u(rng) >= p_same_type) {
    std::uniform_int_distribution<int> other(0, kNumEnvTypes - 2);
    type = other(rng);
    if (type >= parent_type) ++type;
  }
  std::uniform_int_distribution<int> var(0, kNumVariations - 1);
  return {parent, make_cell(static_cast<EnvType>(type), var(rng))};
}

// x' = clamp(x1 + iso_sigma * eps (.) range + line_sigma * nu * (x2 - x1)).
inline TGParams iso_line_variation(const TGParams& x1, const TGParams& x2, Rng& rng, double iso_sigma,
                                   double line_sigma) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto a = x1.to_vector();
  const auto b = x2.to_vector();
  const auto w = TGParams::width();
  TGParams::Vector out{};
  for (int i = 0; i < kNumTGParams; ++i) out[i] = a[i] + iso_sigma * normal(rng) * w[i];
  const double nu = normal(rng);
  for (int i = 0; i < kNumTGParams; ++i) out[i] += line_sigma * nu * (b[i] - a[i]);
  return clamp(TGParams::from_vector(out));
}

// Fitness of a TG in a cell; `seed` identifies the evaluation's random stream.
using TGEvaluator = std::function<double(const TGParams&, const EnvCell&, std::uint64_t seed)>;
using SnapshotHook = std::function<void(const Archive&)>;

struct Phase1Options {
  int workers = 1;
  long snapshot_every = 0;  // evaluations between snapshots, 0 disables
  SnapshotHook on_snapshot;
  std::uint64_t stream = 0;  // distinguishes repeated phase-1 runs on one archive
};

namespace detail {

// A throwing evaluator yields NaN, which try_insert rejects.
inline double guarded(const TGEvaluator& evaluate, const TGParams& tg, const EnvCell& cell, std::uint64_t seed) {
  try {
    return evaluate(tg, cell, seed);
  } catch (const std::exception&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace detail

// Fills init_fraction of the grid with uniform random TGs, each evaluated in
// its own cell.
inline void initialize(Archive& archive, const QDConfig& cfg, const TGEvaluator& evaluate, int workers = 1) {
  if (archive.coverage() != 0) throw std::runtime_error("initialize: archive must be empty");
  const int count = std::clamp(static_cast<int>(std::lround(cfg.init_fraction * kNumCells)), 1, kNumCells);
  Rng rng = make_rng(cfg.master_seed, Stream::QdInit);
  std::vector<int> idx(kNumCells);
  for (int i = 0; i < kNumCells; ++i) idx[i] = i;
  // partial Fisher-Yates for `count` distinct cells
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> d(i, kNumCells - 1);
    std::swap(idx[i], idx[d(rng)]);
  }
  std::vector<TGParams> tgs(count);
  for (auto& t : tgs) t = sample_uniform_tg(rng);
  const long base = archive.evaluations;
  const auto fit = parallel_map(count, workers, [&](std::size_t k) {
    return detail::guarded(evaluate, tgs[k], cell_from_index(idx[k]), derive_seed(cfg.master_seed, Stream::Rollout, {0, static_cast<std::uint64_t>(base + k)}));
  });
  for (int k = 0; k < count; ++k) {
    ++archive.evaluations;
    try_insert(archive, cell_from_index(idx[k]), tgs[k], fit[k]);
  }
}

struct Phase1Stats {
  long evaluations = 0;
  long inserted = 0;
  long replaced = 0;
  long rejected = 0;
};

// Selection / variation / evaluation / insertion until `budget` evaluations
// have been spent (initialisation included when the archive starts empty).
// Each batch is generated from the archive as it stood at batch start,
// evaluated concurrently and inserted in batch order.
inline Phase1Stats run_eetg_phase1(Archive& archive, const QDConfig& cfg, long budget, const TGEvaluator& evaluate,
                                   const Phase1Options& opt = {}) {
  Phase1Stats stats;
  const long start = archive.evaluations;
  long next_snapshot = opt.snapshot_every > 0 ? start + opt.snapshot_every : -1;
  auto maybe_snapshot = [&] {
    while (next_snapshot >= 0 && archive.evaluations >= next_snapshot) {
      if (opt.on_snapshot) opt.on_snapshot(archive);
      next_snapshot += opt.snapshot_every;
    }
  };
  if (archive.coverage() == 0 && budget > 0) {
    QDConfig init_cfg = cfg;
    const long init_count = std::lround(cfg.init_fraction * kNumCells);
    if (init_count > budget) init_cfg.init_fraction = static_cast<double>(budget) / kNumCells;
    initialize(archive, init_cfg, evaluate, opt.workers);
    maybe_snapshot();
  }
  const int batch_size = std::max(1, cfg.batch_size);
  while (archive.evaluations - start < budget) {
    const long remaining = budget - (archive.evaluations - start);
    const int n = static_cast<int>(std::min<long>(batch_size, remaining));
    const long base = archive.evaluations;

    struct Candidate {
      TGParams tg;
      EnvCell target;
      std::uint64_t seed;
    };
    std::vector<Candidate> batch(n);
    for (int k = 0; k < n; ++k) {
      Rng rng = make_rng(cfg.master_seed, Stream::QdBatch, {opt.stream, static_cast<std::uint64_t>(base + k)});
      const Selection sel = select(archive, rng, cfg.p_same_type);
      const auto filled = archive.filled();
      std::uniform_int_distribution<std::size_t> pick(0, filled.size() - 1);
      const Elite& x1 = *archive.cells[sel.parent_cell];
      const Elite& x2 = *archive.cells[filled[pick(rng)]];
      batch[k] = {iso_line_variation(x1.tg, x2.tg, rng, cfg.iso_sigma, cfg.line_sigma), sel.target,
                  derive_seed(cfg.master_seed, Stream::Rollout, {1 + opt.stream, static_cast<std::uint64_t>(base + k)})};
    }
    const auto fit = parallel_map(n, opt.workers, [&](std::size_t k) {
      return detail::guarded(evaluate, batch[k].tg, batch[k].target, batch[k].seed);
    });
    for (int k = 0; k < n; ++k) {
      ++archive.evaluations;
      switch (try_insert(archive, batch[k].target, batch[k].tg, fit[k])) {
        case InsertOutcome::Inserted: ++stats.inserted; break;
        case InsertOutcome::Replaced: ++stats.replaced; break;
        case InsertOutcome::Rejected: ++stats.rejected; break;
      }
      maybe_snapshot();
    }
  }
  stats.evaluations = archive.evaluations - start;
  return stats;
}

}  // namespace eetg
