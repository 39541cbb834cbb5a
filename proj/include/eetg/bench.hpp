#pragma once

// Experiment orchestration: the EETG pipeline, the PMTG / CMA-ES baselines,
// the looped ablations, budgets and the noisy evaluation protocol.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "eetg/ars.hpp"
#include "eetg/cma.hpp"
#include "eetg/parallel.hpp"
#include "eetg/qd.hpp"
#include "eetg/rollout.hpp"
#include "eetg/stats.hpp"
#include "eetg/training.hpp"

namespace eetg {

enum class Variant : int { EETG = 0, PMTG_Enc, PMTG_Ind, CMAES_Enc, CMAES_Ind, EETG_Itr, EETG_ItrPolicy };

inline constexpr std::array<Variant, 7> kVariants{Variant::EETG,      Variant::PMTG_Enc,  Variant::PMTG_Ind,
                                                  Variant::CMAES_Enc, Variant::CMAES_Ind, Variant::EETG_Itr,
                                                  Variant::EETG_ItrPolicy};

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::EETG: return "eetg";
    case Variant::PMTG_Enc: return "pmtg_enc";
    case Variant::PMTG_Ind: return "pmtg_ind";
    case Variant::CMAES_Enc: return "cmaes_enc";
    case Variant::CMAES_Ind: return "cmaes_ind";
    case Variant::EETG_Itr: return "eetg_itr";
    case Variant::EETG_ItrPolicy: return "eetg_itr_policy";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  for (auto v : kVariants)
    if (s == variant_name(v)) return v;
  throw std::invalid_argument("unknown variant '" + std::string(s) + "'");
}

inline bool is_individual(Variant v) { return v == Variant::PMTG_Ind || v == Variant::CMAES_Ind; }
inline bool is_eetg_family(Variant v) {
  return v == Variant::EETG || v == Variant::EETG_Itr || v == Variant::EETG_ItrPolicy;
}

struct BudgetPlan {
  long tg_opt_evals = 0;
  long policy_opt_evals = 0;
  double scale_factor = 1.0;

  long total() const { return tg_opt_evals + policy_opt_evals; }
};

// Rollout budgets at full scale; the ablations spend exactly what EETG does.
inline BudgetPlan full_scale_budget(Variant v) {
  switch (v) {
    case Variant::EETG:
    case Variant::EETG_Itr:
    case Variant::EETG_ItrPolicy: return {384'000, 4'608'000, 1.0};
    case Variant::PMTG_Enc: return {0, 5'280'000, 1.0};
    case Variant::PMTG_Ind: return {0, 23'040'000, 1.0};
    case Variant::CMAES_Enc: return {384'000, 4'608'000, 1.0};
    case Variant::CMAES_Ind: return {1'280'000, 23'040'000, 1.0};
  }
  throw std::invalid_argument("full_scale_budget: bad variant");
}

inline BudgetPlan budget_for(Variant v, double scale_factor) {
  if (!(scale_factor > 0.0) || !std::isfinite(scale_factor)) throw std::invalid_argument("scale_factor must be positive");
  const BudgetPlan full = full_scale_budget(v);
  return {std::lround(full.tg_opt_evals * scale_factor), std::lround(full.policy_opt_evals * scale_factor),
          scale_factor};
}

// Stepping in place with a trot: the unbiased prior of vanilla PMTG.
inline TGParams fixed_pmtg_tg() { return TGParams{0.0, 0.0, 0.08, 0.0, encode_gait(Gait::Trot)}; }

struct CmaTgConfig {
  double sigma = 0.25;       // in the unit box the TG is searched in
  int lambda = 0;            // 0: default for five dimensions (8)
  int cells_per_generation = 8;  // Enc. objective: mean over this many drawn cells
};

struct EvalProtocol {
  int reps = 20;
  double noise_std = 0.05;
  std::uint64_t seed = 2024;
};

struct ExperimentConfig {
  Variant variant = Variant::EETG;
  std::uint64_t master_seed = 1;
  double scale_factor = 0.01;
  QDConfig qd;
  ArsConfig ars;
  CmaTgConfig cma;
  SimConfig sim;
  RewardWeights reward;
  double train_noise_std = 0.05;
  int ablation_loops = 2;
  EnvEncoding enc_encoding = EnvEncoding::Compact;
  int policy_hidden = 0;
  double foot_scale = 0.01;
  double freq_scale = 0.01;
  EvalProtocol eval;
  int workers = 1;

  BudgetPlan budget() const { return budget_for(variant, scale_factor); }
};

// The TG search space for CMA-ES is the unit box mapped affinely onto the
// TG ranges; samples are clamped before evaluation.
inline TGParams tg_from_unit(const Eigen::VectorXd& u) {
  if (u.size() != kNumTGParams) throw std::invalid_argument("tg_from_unit: need 5 coordinates");
  const auto lo = TGParams::lower();
  const auto w = TGParams::width();
  TGParams::Vector v{};
  for (int i = 0; i < kNumTGParams; ++i) {
    const double c = std::isfinite(u[i]) ? std::clamp(u[i], 0.0, 1.0) : 0.0;
    v[i] = lo[i] + c * w[i];
  }
  return clamp(TGParams::from_vector(v));
}

inline Eigen::VectorXd unit_from_tg(const TGParams& tg) {
  const auto lo = TGParams::lower();
  const auto w = TGParams::width();
  const auto v = tg.to_vector();
  Eigen::VectorXd u(kNumTGParams);
  for (int i = 0; i < kNumTGParams; ++i) u[i] = (v[i] - lo[i]) / w[i];
  return u;
}

struct PolicyRecord {
  Policy policy;
  int cell = -1;  // owning cell for per-cell policies, -1 when shared
  long iterations = 0;
  long rollouts = 0;
};

struct BudgetUsage {
  long tg_evals = 0;
  long policy_evals = 0;
};

struct CmaRecord {
  int cell = -1;  // -1 for the shared multi-cell search
  CmaState state;
};

struct Artifacts {
  Variant variant = Variant::EETG;
  std::uint64_t master_seed = 0;
  double scale_factor = 0.0;
  BudgetPlan plan;
  BudgetUsage used;
  Archive archive;  // EETG family only
  std::array<std::optional<TGParams>, kNumCells> tgs{};  // TG deployed in each cell
  std::vector<PolicyRecord> policies;
  std::vector<CmaRecord> cma;
};

struct RunHooks {
  long snapshot_every = 0;  // phase-1 evaluations between archive snapshots
  std::function<void(const Archive&)> on_snapshot;
  std::function<void(const std::string&)> log;
};

inline PolicyLayout make_layout(const ExperimentConfig& cfg, bool tg_conditioned, EnvEncoding enc) {
  PolicyLayout l;
  l.tg_conditioned = tg_conditioned;
  l.encoding = enc;
  l.hidden = cfg.policy_hidden;
  l.foot_scale = cfg.foot_scale;
  l.freq_scale = cfg.freq_scale;
  return l;
}

namespace detail {

inline void say(const RunHooks& h, const std::string& msg) {
  if (h.log) h.log(msg);
}

inline std::uint64_t u64(long v) { return static_cast<std::uint64_t>(v); }

// Shared multi-cell CMA-ES: every generation draws `cells_per_generation`
// cells and rollout seeds, shared by all candidates so they are ranked on
// the same environments.
inline CmaState cma_tg_shared(const ExperimentConfig& cfg, long budget, long& used) {
  CmaState s = cma_init(Eigen::VectorXd::Constant(kNumTGParams, 0.5), cfg.cma.sigma, cfg.cma.lambda);
  const int m = std::max(1, cfg.cma.cells_per_generation);
  const long per_gen = static_cast<long>(s.lambda) * m;
  while (budget - used >= per_gen) {
    Rng cell_rng = make_rng(cfg.master_seed, Stream::CmaCells, {u64(s.generation)});
    std::uniform_int_distribution<int> pick(0, kNumCells - 1);
    std::vector<int> cells(m);
    std::vector<std::uint64_t> seeds(m);
    for (int j = 0; j < m; ++j) {
      cells[j] = pick(cell_rng);
      seeds[j] = derive_seed(cfg.master_seed, Stream::Rollout, {0xc0, u64(s.generation), u64(j)});
    }
    Rng rng = make_rng(cfg.master_seed, Stream::Cma, {0xc0, u64(s.generation)});
    const auto xs = cma_ask(s, rng);
    const auto returns = parallel_map(xs.size() * m, cfg.workers, [&](std::size_t i) {
      const std::size_t k = i / m, j = i % m;
      return rollout({tg_from_unit(xs[k]), nullptr, cell_from_index(cells[j]), cfg.qd.eval_noise_std, seeds[j]},
                     cfg.sim, cfg.reward)
          .episode_return;
    });
    std::vector<double> f(xs.size(), 0.0);
    for (std::size_t i = 0; i < returns.size(); ++i) f[i / m] += returns[i] / m;
    cma_tell(s, xs, f);
    used += per_gen;
  }
  return s;
}

// Per-cell CMA-ES with single noisy evaluations in that cell.
inline CmaState cma_tg_cell(const ExperimentConfig& cfg, int cell, long budget, long& used) {
  CmaState s = cma_init(Eigen::VectorXd::Constant(kNumTGParams, 0.5), cfg.cma.sigma, cfg.cma.lambda);
  long spent = 0;
  while (budget - spent >= s.lambda) {
    Rng rng = make_rng(cfg.master_seed, Stream::Cma, {0xce11, u64(cell), u64(s.generation)});
    const auto xs = cma_ask(s, rng);
    const auto f = parallel_map(xs.size(), cfg.workers, [&](std::size_t k) {
      const std::uint64_t seed =
          derive_seed(cfg.master_seed, Stream::Rollout, {0xce11, u64(cell), u64(s.generation), u64(k)});
      return rollout({tg_from_unit(xs[k]), nullptr, cell_from_index(cell), cfg.qd.eval_noise_std, seed}, cfg.sim,
                     cfg.reward)
          .episode_return;
    });
    cma_tell(s, xs, f);
    spent += s.lambda;
  }
  used += spent;
  return s;
}

inline PolicyRecord train_record(const ExperimentConfig& cfg, const PolicyLayout& layout,
                                 const std::vector<TrainingTask>& tasks, long budget, std::uint64_t stream,
                                 int cell, ArsState* resume = nullptr) {
  ArsState local = make_ars_state(make_initial_policy(layout, cfg.master_seed), cfg.ars);
  ArsState& st = resume != nullptr ? *resume : local;
  TrainingOptions opt;
  opt.budget = budget;
  opt.train_noise_std = cfg.train_noise_std;
  opt.seed = cfg.master_seed;
  opt.stream = stream;
  opt.workers = cfg.workers;
  const TrainingStats ts = train_policy(st, layout, tasks, cfg.sim, cfg.reward, opt);
  return PolicyRecord{policy_from_state(layout, st), cell, st.iteration, ts.rollouts};
}

inline std::vector<TrainingTask> archive_tasks(const Archive& a) {
  std::vector<TrainingTask> tasks;
  for (int c : a.filled()) tasks.push_back({cell_from_index(c), a.cells[c]->tg});
  return tasks;
}

}  // namespace detail

// Phase 1 + policy training, repeated `loops` times with the budget split
// equally (remainders go to the last loop). The archive and the ARS state
// carry over between loops. With policy_in_loop, phase-1 evaluations from the
// second loop on run the current policy on top of the candidate TG.
inline Artifacts run_eetg_loops(const ExperimentConfig& cfg, int loops, bool policy_in_loop,
                                const RunHooks& hooks = {}) {
  if (loops < 1) throw std::invalid_argument("loop count must be at least 1");
  const BudgetPlan plan = budget_for(Variant::EETG, cfg.scale_factor);
  Artifacts art;
  art.variant = cfg.variant;
  art.master_seed = cfg.master_seed;
  art.scale_factor = cfg.scale_factor;
  art.plan = plan;

  QDConfig qd = cfg.qd;
  qd.master_seed = cfg.master_seed;
  const PolicyLayout layout = make_layout(cfg, true, EnvEncoding::None);
  ArsState ars = make_ars_state(make_initial_policy(layout, cfg.master_seed), cfg.ars);
  std::optional<Policy> current;

  for (int k = 0; k < loops; ++k) {
    const bool last = k + 1 == loops;
    const long tg_budget = last ? plan.tg_opt_evals - (plan.tg_opt_evals / loops) * k : plan.tg_opt_evals / loops;
    const long pol_budget =
        last ? plan.policy_opt_evals - (plan.policy_opt_evals / loops) * k : plan.policy_opt_evals / loops;

    const Policy* in_loop = policy_in_loop && current ? &*current : nullptr;
    const TGEvaluator evaluate = [&](const TGParams& tg, const EnvCell& cell, std::uint64_t seed) {
      return rollout({tg, in_loop, cell, qd.eval_noise_std, seed}, cfg.sim, cfg.reward).episode_return;
    };
    Phase1Options opt;
    opt.workers = cfg.workers;
    opt.snapshot_every = hooks.snapshot_every;
    opt.on_snapshot = hooks.on_snapshot;
    opt.stream = static_cast<std::uint64_t>(k);
    detail::say(hooks, "loop " + std::to_string(k + 1) + "/" + std::to_string(loops) + ": phase 1, " +
                           std::to_string(tg_budget) + " evaluations");
    const Phase1Stats p1 = run_eetg_phase1(art.archive, qd, tg_budget, evaluate, opt);
    art.used.tg_evals += p1.evaluations;
    if (art.archive.coverage() == 0) throw std::runtime_error("phase 1 left the archive empty");

    detail::say(hooks, "loop " + std::to_string(k + 1) + ": policy training, " + std::to_string(pol_budget) +
                           " rollouts over " + std::to_string(art.archive.coverage()) + " cells");
    PolicyRecord rec = detail::train_record(cfg, layout, detail::archive_tasks(art.archive), pol_budget,
                                            static_cast<std::uint64_t>(k), -1, &ars);
    art.used.policy_evals += rec.rollouts;
    current = rec.policy;
    art.policies = {rec};
    art.policies[0].rollouts = art.used.policy_evals;
  }
  for (int c = 0; c < kNumCells; ++c)
    if (art.archive.cells[c]) art.tgs[c] = art.archive.cells[c]->tg;
  return art;
}

inline Artifacts run_ablation(const ExperimentConfig& cfg, const RunHooks& hooks = {}) {
  if (cfg.variant != Variant::EETG_Itr && cfg.variant != Variant::EETG_ItrPolicy)
    throw std::invalid_argument("run_ablation: variant must be eetg_itr or eetg_itr_policy");
  if (cfg.ablation_loops < 2) throw std::invalid_argument("run_ablation: needs at least two loops");
  return run_eetg_loops(cfg, cfg.ablation_loops, cfg.variant == Variant::EETG_ItrPolicy, hooks);
}

inline Artifacts run_variant(const ExperimentConfig& cfg, const RunHooks& hooks = {}) {
  switch (cfg.variant) {
    case Variant::EETG: return run_eetg_loops(cfg, 1, false, hooks);
    case Variant::EETG_Itr:
    case Variant::EETG_ItrPolicy: return run_ablation(cfg, hooks);
    default: break;
  }
  const BudgetPlan plan = cfg.budget();
  Artifacts art;
  art.variant = cfg.variant;
  art.master_seed = cfg.master_seed;
  art.scale_factor = cfg.scale_factor;
  art.plan = plan;

  // TG source
  if (cfg.variant == Variant::PMTG_Enc || cfg.variant == Variant::PMTG_Ind) {
    art.tgs.fill(fixed_pmtg_tg());
  } else if (cfg.variant == Variant::CMAES_Enc) {
    detail::say(hooks, "cma-es over one TG, " + std::to_string(plan.tg_opt_evals) + " evaluations");
    CmaState s = detail::cma_tg_shared(cfg, plan.tg_opt_evals, art.used.tg_evals);
    // the noisy objective changes cell draws every generation, so the
    // distribution mean is the estimate, not a lucky best-ever sample
    art.tgs.fill(tg_from_unit(s.mean));
    art.cma.push_back({-1, std::move(s)});
  } else {
    const long per_cell = plan.tg_opt_evals / kNumCells;
    detail::say(hooks, "cma-es per cell, " + std::to_string(per_cell) + " evaluations each");
    for (int c = 0; c < kNumCells; ++c) {
      const long cell_budget = per_cell + (c < plan.tg_opt_evals % kNumCells ? 1 : 0);
      CmaState s = detail::cma_tg_cell(cfg, c, cell_budget, art.used.tg_evals);
      art.tgs[c] = s.best_x.size() == kNumTGParams ? tg_from_unit(s.best_x) : tg_from_unit(s.mean);
      art.cma.push_back({c, std::move(s)});
    }
  }

  if (is_individual(cfg.variant)) {
    const PolicyLayout layout = make_layout(cfg, false, EnvEncoding::None);
    const long per_cell = plan.policy_opt_evals / kNumCells;
    detail::say(hooks, "80 per-cell policies, " + std::to_string(per_cell) + " rollouts each");
    for (int c = 0; c < kNumCells; ++c) {
      const long cell_budget = per_cell + (c < plan.policy_opt_evals % kNumCells ? 1 : 0);
      PolicyRecord rec = detail::train_record(cfg, layout, {{cell_from_index(c), *art.tgs[c]}}, cell_budget,
                                              1000 + static_cast<std::uint64_t>(c), c);
      art.used.policy_evals += rec.rollouts;
      art.policies.push_back(std::move(rec));
    }
  } else {
    const PolicyLayout layout = make_layout(cfg, false, cfg.enc_encoding);
    std::vector<TrainingTask> tasks;
    for (int c = 0; c < kNumCells; ++c) tasks.push_back({cell_from_index(c), *art.tgs[c]});
    detail::say(hooks, "shared encoded policy, " + std::to_string(plan.policy_opt_evals) + " rollouts");
    PolicyRecord rec = detail::train_record(cfg, layout, tasks, plan.policy_opt_evals, 0, -1);
    art.used.policy_evals += rec.rollouts;
    art.policies.push_back(std::move(rec));
  }
  return art;
}

// ---------------------------------------------------------------- evaluation

struct CellResult {
  int cell = 0;
  bool failed = false;
  std::string reason;
  std::vector<double> returns;
  std::vector<Termination> terminations;
  std::vector<std::uint64_t> seeds;
  double mean = 0.0;
};

struct EvalReport {
  Variant variant = Variant::EETG;
  std::uint64_t master_seed = 0;
  double scale_factor = 0.0;
  EvalProtocol protocol;
  std::array<CellResult, kNumCells> cells{};
  std::array<Summary, kNumEnvTypes> types{};
  std::array<int, kNumEnvTypes> failed{};
  double aggregate_median = 0.0;
};

inline std::uint64_t eval_seed(const EvalProtocol& p, int cell, int rep) {
  return derive_seed(p.seed, Stream::Evaluation, {static_cast<std::uint64_t>(cell), static_cast<std::uint64_t>(rep)});
}

// Finds the TG / policy pair deployed in a cell. Returns an error string when
// the artifacts cannot serve that cell.
inline std::string bind_cell(const Artifacts& art, int cell, const Policy*& policy, TGParams& tg) {
  policy = nullptr;
  if (!art.tgs[cell]) return "no TG for this cell";
  tg = *art.tgs[cell];
  if (is_individual(art.variant)) {
    const PolicyRecord* found = nullptr;
    for (const auto& r : art.policies) {
      if (r.cell != cell) continue;
      if (found != nullptr) return "two policies claim this cell";
      found = &r;
    }
    if (found == nullptr) return "no policy trained for this cell";
    policy = &found->policy;
  } else {
    if (art.policies.size() != 1) return "expected one shared policy, found " + std::to_string(art.policies.size());
    if (art.policies[0].cell != -1) return "shared policy is bound to cell " + std::to_string(art.policies[0].cell);
    policy = &art.policies[0].policy;
  }
  try {
    policy->check();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

inline EvalReport summarize_cells(EvalReport rep) {
  std::vector<double> all;
  for (int t = 0; t < kNumEnvTypes; ++t) {
    std::vector<double> means;
    rep.failed[t] = 0;
    for (int v = 0; v < kNumVariations; ++v) {
      const CellResult& c = rep.cells[t * kNumVariations + v];
      if (c.failed) {
        ++rep.failed[t];
        continue;
      }
      means.push_back(c.mean);
    }
    rep.types[t] = summarize(means);
    all.insert(all.end(), means.begin(), means.end());
  }
  rep.aggregate_median = all.empty() ? 0.0 : median(all);
  return rep;
}

// `reps` noisy rollouts per cell with the cell's own TG/policy; the per-cell
// mean feeds the per-type median. Seeds depend on (protocol seed, cell, rep)
// only, so every variant sees the same perturbed environments.
inline EvalReport evaluate(const Artifacts& art, const EvalProtocol& protocol, const SimConfig& sim,
                           const RewardWeights& reward, int workers = 1) {
  if (protocol.reps < 1) throw std::invalid_argument("evaluate: reps must be positive");
  EvalReport rep;
  rep.variant = art.variant;
  rep.master_seed = art.master_seed;
  rep.scale_factor = art.scale_factor;
  rep.protocol = protocol;

  std::array<const Policy*, kNumCells> policy{};
  std::array<TGParams, kNumCells> tg{};
  for (int c = 0; c < kNumCells; ++c) {
    rep.cells[c].cell = c;
    const std::string err = bind_cell(art, c, policy[c], tg[c]);
    if (!err.empty()) {
      rep.cells[c].failed = true;
      rep.cells[c].reason = err;
    }
  }
  const std::size_t reps = static_cast<std::size_t>(protocol.reps);
  const auto results = parallel_map(kNumCells * reps, workers, [&](std::size_t i) {
    const int c = static_cast<int>(i / reps);
    const int r = static_cast<int>(i % reps);
    if (rep.cells[c].failed) return RolloutResult{};
    return rollout({tg[c], policy[c], cell_from_index(c), protocol.noise_std, eval_seed(protocol, c, r)}, sim, reward);
  });
  for (int c = 0; c < kNumCells; ++c) {
    CellResult& cr = rep.cells[c];
    if (cr.failed) continue;
    for (std::size_t r = 0; r < reps; ++r) {
      const RolloutResult& res = results[c * reps + r];
      cr.returns.push_back(res.episode_return);
      cr.terminations.push_back(res.termination);
      cr.seeds.push_back(eval_seed(protocol, c, static_cast<int>(r)));
    }
    cr.mean = mean(cr.returns);
  }
  return summarize_cells(std::move(rep));
}

}  // namespace eetg
