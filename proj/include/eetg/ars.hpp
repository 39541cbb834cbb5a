#pragma once

// Augmented Random Search, V2-t: top-b directions, reward-std scaling and a
// running observation normaliser maintained by the caller's rollouts.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "eetg/policy.hpp"
#include "eetg/rng.hpp"

namespace eetg {

struct ArsConfig {
  int directions = 32;
  int top = 16;
  double step_size = 0.02;
  double noise = 0.03;
};

struct ArsState {
  Eigen::VectorXd theta;
  RunningStats normalizer;
  ArsConfig config;
  long iteration = 0;
  long evaluations = 0;
};

// Result of one perturbed rollout. `visited` holds the inputs the policy saw.
struct ArsEvaluation {
  double ret = 0.0;
  RunningStats visited;
};

// Evaluates candidates[2k] = theta + nu*delta_k and candidates[2k+1] =
// theta - nu*delta_k. Both members of a pair should share the same
// environment draw.
using ArsBatchOracle = std::function<std::vector<ArsEvaluation>(const std::vector<Eigen::VectorXd>& candidates)>;

struct ArsStepInfo {
  int directions = 0;
  int used = 0;
  double reward_std = 0.0;
  bool skipped = false;
  double mean_return = 0.0;
};

// Applies the update for directions `deltas` given evals[2k] / evals[2k+1],
// the returns of theta + nu*delta_k and theta - nu*delta_k.
inline ArsStepInfo ars_apply(ArsState& s, const std::vector<Eigen::VectorXd>& deltas,
                             const std::vector<ArsEvaluation>& evals) {
  const int n = static_cast<int>(deltas.size());
  const int b = std::min(s.config.top, n);
  if (n <= 0 || b <= 0) throw std::invalid_argument("ars_apply: need at least one direction");
  if (evals.size() != 2 * deltas.size()) throw std::invalid_argument("ars_apply: expected two returns per direction");
  const Eigen::Index dim = s.theta.size();
  s.evaluations += static_cast<long>(evals.size());

  ArsStepInfo info;
  info.directions = n;
  info.used = b;
  for (const auto& e : evals) info.mean_return += e.ret / evals.size();

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int c) {
    return std::max(evals[2 * a].ret, evals[2 * a + 1].ret) > std::max(evals[2 * c].ret, evals[2 * c + 1].ret);
  });

  double mean = 0.0;
  for (int i = 0; i < b; ++i) mean += evals[2 * order[i]].ret + evals[2 * order[i] + 1].ret;
  mean /= 2.0 * b;
  double var = 0.0;
  for (int i = 0; i < b; ++i) {
    const double a = evals[2 * order[i]].ret - mean;
    const double c = evals[2 * order[i] + 1].ret - mean;
    var += a * a + c * c;
  }
  info.reward_std = std::sqrt(var / (2.0 * b));

  if (info.reward_std > 0.0 && std::isfinite(info.reward_std)) {
    Eigen::VectorXd step = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < b; ++i) {
      const int k = order[i];
      step += (evals[2 * k].ret - evals[2 * k + 1].ret) * deltas[k];
    }
    s.theta += (s.config.step_size / (b * info.reward_std)) * step;
  } else {
    info.skipped = true;
  }

  for (const auto& e : evals) s.normalizer.merge(e.visited);
  ++s.iteration;
  return info;
}

// One update with `directions` (<= config.directions) sampled directions.
inline ArsStepInfo ars_update(ArsState& s, Rng& rng, const ArsBatchOracle& oracle, int directions = -1) {
  const int n = directions > 0 ? directions : s.config.directions;
  if (n <= 0) throw std::invalid_argument("ars_update: need at least one direction");
  const Eigen::Index dim = s.theta.size();

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> deltas(n, Eigen::VectorXd(dim));
  for (auto& d : deltas)
    for (Eigen::Index i = 0; i < dim; ++i) d[i] = normal(rng);

  std::vector<Eigen::VectorXd> candidates;
  candidates.reserve(2 * n);
  for (const auto& d : deltas) {
    candidates.push_back(s.theta + s.config.noise * d);
    candidates.push_back(s.theta - s.config.noise * d);
  }
  const std::vector<ArsEvaluation> evals = oracle(candidates);
  if (evals.size() != candidates.size()) throw std::runtime_error("ars_update: oracle returned wrong batch size");
  return ars_apply(s, deltas, evals);
}

}  // namespace eetg
