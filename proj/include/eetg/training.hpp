#pragma once

// Residual-policy training with ARS over one or more (cell, TG) tasks.

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "eetg/ars.hpp"
#include "eetg/parallel.hpp"
#include "eetg/policy.hpp"
#include "eetg/rollout.hpp"

namespace eetg {

// A cell and the TG the policy modulates there.
struct TrainingTask {
  EnvCell cell;
  TGParams tg;
};

struct TrainingOptions {
  long budget = 0;              // rollouts
  double train_noise_std = 0.05;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;     // distinguishes separate trainings under one seed
  int workers = 1;
  int max_steps = -1;
  std::function<void(const ArsState&, const ArsStepInfo&)> on_iteration;
};

struct TrainingStats {
  long rollouts = 0;
  long iterations = 0;
  double last_mean_return = 0.0;
};

inline ArsState make_ars_state(const Policy& init, const ArsConfig& cfg) {
  init.check();
  return ArsState{init.params, init.normalizer, cfg, 0, 0};
}

inline Policy policy_from_state(const PolicyLayout& layout, const ArsState& s) {
  return Policy{layout, s.theta, s.normalizer};
}

// Runs ARS until `budget` rollouts are spent. Every direction draws a task
// uniformly and a rollout seed; both perturbations of that direction share
// them. The final iteration shrinks its direction count to fit the budget.
inline TrainingStats train_policy(ArsState& state, const PolicyLayout& layout, const std::vector<TrainingTask>& tasks,
                                  const SimConfig& sim, const RewardWeights& weights, const TrainingOptions& opt) {
  if (tasks.empty()) throw std::invalid_argument("train_policy: no tasks to train on");
  if (state.theta.size() != layout.param_dim()) throw std::invalid_argument("train_policy: parameter size mismatch");
  TrainingStats stats;
  while (opt.budget - stats.rollouts >= 2) {
    const int directions =
        static_cast<int>(std::min<long>(state.config.directions, (opt.budget - stats.rollouts) / 2));
    Rng task_rng = make_rng(opt.seed, Stream::ArsTasks, {opt.stream, static_cast<std::uint64_t>(state.iteration)});
    std::uniform_int_distribution<std::size_t> pick(0, tasks.size() - 1);
    std::vector<std::size_t> task_of(directions);
    std::vector<std::uint64_t> seed_of(directions);
    for (int k = 0; k < directions; ++k) {
      task_of[k] = pick(task_rng);
      seed_of[k] = task_rng();
    }
    const RunningStats frozen = state.normalizer;
    ArsBatchOracle oracle = [&](const std::vector<Eigen::VectorXd>& candidates) {
      return parallel_map(candidates.size(), opt.workers, [&](std::size_t i) {
        const std::size_t k = i / 2;
        const TrainingTask& task = tasks[task_of[k]];
        const Policy policy{layout, candidates[i], frozen};
        ArsEvaluation e;
        e.visited = RunningStats(layout.input_dim());
        const RolloutSpec spec{task.tg, &policy, task.cell, opt.train_noise_std, seed_of[k], opt.max_steps};
        e.ret = rollout(spec, sim, weights, &e.visited).episode_return;
        return e;
      });
    };
    Rng dir_rng = make_rng(opt.seed, Stream::ArsDirections, {opt.stream, static_cast<std::uint64_t>(state.iteration)});
    const ArsStepInfo info = ars_update(state, dir_rng, oracle, directions);
    stats.rollouts += 2L * directions;
    ++stats.iterations;
    stats.last_mean_return = info.mean_return;
    if (opt.on_iteration) opt.on_iteration(state, info);
  }
  return stats;
}

}  // namespace eetg
