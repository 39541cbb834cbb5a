#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "eetg/policy.hpp"
#include "eetg/sim.hpp"
#include "eetg/terrain.hpp"
#include "eetg/tg.hpp"

namespace eetg {

struct RolloutResult {
  double episode_return = 0.0;
  RewardTerms reward_terms{};  // lv, av_t, av_p, s, tp
  int steps = 0;
  Termination termination = Termination::TimeLimit;
  int nonfinite_residuals = 0;
  double forward_displacement = 0.0;
  bool workspace_ok = true;

  friend bool operator==(const RolloutResult&, const RolloutResult&) = default;
};

struct RolloutSpec {
  TGParams tg;
  const Policy* policy = nullptr;  // null runs the open-loop TG
  EnvCell cell;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  int max_steps = -1;  // negative uses the episode length from SimConfig
};

struct TraceRow {
  double time;
  TrunkState trunk;
  FootTargets targets;
  RewardTerms reward;
};

using TraceSink = std::function<void(const TraceRow&)>;

// One episode: build the (perturbed) terrain, start on the spawn pad and run
// control steps until a termination condition or the step limit. When
// `visited` is given every policy input seen is pushed into it.
inline RolloutResult rollout(const RolloutSpec& spec, const SimConfig& cfg, const RewardWeights& weights,
                             RunningStats* visited = nullptr, const TraceSink& trace = {}) {
  const TGParams tg = clamp(spec.tg);
  const Terrain terrain = build_terrain(spec.cell, spec.noise_std, spec.seed, cfg.terrain);
  const int max_steps = spec.max_steps >= 0 ? spec.max_steps : cfg.max_steps();

  TGState tg_state = initial_tg_state(decode_gait(tg.gait_latent), cfg.tg);
  SimState state = reset_state(cfg, foot_targets(tg, tg_state, cfg.tg));
  const double x0 = state.trunk.position.x();

  RolloutResult result;
  for (int step = 0; step < max_steps; ++step) {
    PolicyOutput out;
    if (spec.policy != nullptr) {
      const Eigen::VectorXd input =
          assemble_input(spec.policy->layout, observe(state, cfg), tg_state, tg, spec.cell);
      if (visited != nullptr) visited->push(input);
      out = spec.policy->forward(input);
      result.nonfinite_residuals += out.nonfinite;
    }
    const PhaseAdvance adv = advance_phase(tg_state, out.freq_residuals, cfg.control_dt, cfg.tg);
    tg_state = adv.state;
    result.nonfinite_residuals += adv.nonfinite_residuals;

    const FootTargets targets = compose_targets(foot_targets(tg, tg_state, cfg.tg), out, cfg.leg_length);
    const StepDiagnostics diag = step_control(state, targets, terrain, cfg);
    result.workspace_ok = result.workspace_ok && diag.workspace_ok;

    const RewardTerms r = reward_step(state.trunk, state.targets, state.prev_targets, diag.grf_sq, weights);
    const auto term = check_termination(state, terrain, cfg);
    ++result.steps;
    if (term == Termination::Diverged) {
      result.termination = *term;
      break;
    }
    for (int k = 0; k < kNumRewardTerms; ++k) result.reward_terms[k] += r[k];
    if (trace) trace({state.time, state.trunk, state.targets, r});
    if (term) {
      result.termination = *term;
      break;
    }
  }
  result.episode_return = 0.0;
  for (double t : result.reward_terms) result.episode_return += t;
  if (finite(state.trunk)) result.forward_displacement = state.trunk.position.x() - x0;
  return result;
}

}  // namespace eetg
