#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "eetg/bench.hpp"
#include "support.hpp"

using namespace eetg;

namespace {

double filled_mean(const EvalReport& r) {
  double s = 0.0;
  int n = 0;
  for (const auto& c : r.cells)
    if (!c.failed) {
      s += c.mean;
      ++n;
    }
  return s / n;
}

}  // namespace

TEST(Budget, FullScaleArithmetic) {
  EXPECT_EQ(full_scale_budget(Variant::EETG).total(), 4'992'000);
  EXPECT_EQ(full_scale_budget(Variant::PMTG_Ind).policy_opt_evals / kNumCells, 288'000);
  EXPECT_EQ(full_scale_budget(Variant::CMAES_Ind).tg_opt_evals / kNumCells, 16'000);
  // the ablations spend what EETG spends
  EXPECT_EQ(full_scale_budget(Variant::EETG_Itr).total(), full_scale_budget(Variant::EETG).total());
  const double ratio = static_cast<double>(full_scale_budget(Variant::EETG).total()) /
                       static_cast<double>(full_scale_budget(Variant::CMAES_Ind).total());
  EXPECT_LE(ratio, 0.25);
}

TEST(Budget, DeskScaleIsOnePercent) {
  for (Variant v : kVariants) {
    const BudgetPlan full = full_scale_budget(v);
    const BudgetPlan desk = budget_for(v, 0.01);
    EXPECT_EQ(desk.tg_opt_evals * 100, full.tg_opt_evals) << variant_name(v);
    EXPECT_EQ(desk.policy_opt_evals * 100, full.policy_opt_evals) << variant_name(v);
  }
  EXPECT_EQ(budget_for(Variant::EETG, 0.01).tg_opt_evals, 3'840);
  EXPECT_EQ(budget_for(Variant::EETG, 0.01).policy_opt_evals, 46'080);
  EXPECT_THROW(budget_for(Variant::EETG, 0.0), std::invalid_argument);
  EXPECT_THROW(budget_for(Variant::EETG, NAN), std::invalid_argument);
}

TEST(Ablation, TwoLoopsSplitTheBudgetEvenly) {
  // at scale 0.01 each loop gets 1,920 phase-1 and 23,040 policy evaluations
  const BudgetPlan p = budget_for(Variant::EETG_Itr, 0.01);
  EXPECT_EQ(p.tg_opt_evals / 2, 1'920);
  EXPECT_EQ(p.policy_opt_evals / 2, 23'040);

  // the same split, observed through the loop log on a tiny run
  ExperimentConfig cfg = fixtures::tiny_config(Variant::EETG_Itr);
  std::vector<std::string> log;
  RunHooks hooks;
  hooks.log = [&](const std::string& m) { log.push_back(m); };
  const Artifacts art = run_variant(cfg, hooks);
  const BudgetPlan tiny = cfg.budget();
  const std::string half = std::to_string(tiny.tg_opt_evals / 2) + " evaluations";
  int phase1_lines = 0;
  for (const auto& m : log)
    if (m.find("phase 1") != std::string::npos) {
      ++phase1_lines;
      EXPECT_NE(m.find(half), std::string::npos) << m;
    }
  EXPECT_EQ(phase1_lines, 2);
  EXPECT_EQ(art.used.tg_evals, tiny.tg_opt_evals);
  EXPECT_EQ(art.used.policy_evals, tiny.policy_opt_evals);
}

TEST(Ablation, SingleLoopIsExactlyEetg) {
  const ExperimentConfig cfg = fixtures::tiny_config(Variant::EETG, 5);
  const Artifacts eetg = run_variant(cfg);
  ExperimentConfig itr = cfg;
  itr.variant = Variant::EETG_Itr;
  const Artifacts one = run_eetg_loops(itr, 1, false);
  const Artifacts one_policy = run_eetg_loops(itr, 1, true);
  EXPECT_EQ(one.archive, eetg.archive);
  EXPECT_EQ(one.tgs, eetg.tgs);
  ASSERT_EQ(one.policies.size(), 1u);
  EXPECT_EQ(one.policies[0].policy, eetg.policies[0].policy);
  EXPECT_EQ(one_policy.archive, eetg.archive);

  itr.ablation_loops = 1;
  EXPECT_THROW(run_ablation(itr), std::invalid_argument);
}

TEST(Ablation, PolicyReachesPhaseOneEvaluation) {
  const ExperimentConfig cfg = fixtures::tiny_config(Variant::EETG_ItrPolicy, 7, 0.001);
  const Artifacts art = run_variant(cfg);
  const Policy& policy = art.policies[0].policy;
  ASSERT_GT(policy.params.cwiseAbs().maxCoeff(), 0.0);
  // paired: the same elite, cell and seed, with and without the policy
  int differ = 0;
  for (int c : art.archive.filled()) {
    const TGParams tg = art.archive.cells[c]->tg;
    const EnvCell cell = cell_from_index(c);
    const double open = rollout({tg, nullptr, cell, 0.05, 99}, cfg.sim, cfg.reward).episode_return;
    const double closed = rollout({tg, &policy, cell, 0.05, 99}, cfg.sim, cfg.reward).episode_return;
    differ += open != closed;
  }
  EXPECT_EQ(differ, art.archive.coverage());

  ExperimentConfig itr = cfg;
  itr.variant = Variant::EETG_Itr;
  EXPECT_NE(run_variant(itr).archive, art.archive);
}

TEST(Variants, IndividualBaselinesBindOnePolicyPerCell) {
  for (Variant v : {Variant::PMTG_Ind, Variant::CMAES_Ind}) {
    const ExperimentConfig cfg = fixtures::tiny_config(v);
    const Artifacts art = run_variant(cfg);
    ASSERT_EQ(art.policies.size(), static_cast<std::size_t>(kNumCells));
    std::set<int> owners;
    for (const auto& r : art.policies) owners.insert(r.cell);
    EXPECT_EQ(owners.size(), static_cast<std::size_t>(kNumCells));
    EXPECT_EQ(*owners.begin(), 0);
    EXPECT_EQ(*owners.rbegin(), kNumCells - 1);
    EXPECT_EQ(art.used.policy_evals, cfg.budget().policy_opt_evals);
    EXPECT_EQ(art.used.tg_evals, cfg.budget().tg_opt_evals);
    for (int c = 0; c < kNumCells; ++c) {
      const Policy* p = nullptr;
      TGParams tg;
      ASSERT_EQ(bind_cell(art, c, p, tg), "");
      EXPECT_EQ(p, &art.policies[static_cast<std::size_t>(c)].policy);
    }

    // a policy rebound to another cell is caught, never silently used
    Artifacts broken = art;
    broken.policies[3].cell = 4;
    const EvalReport rep = evaluate(broken, {1, 0.0, 1}, cfg.sim, cfg.reward);
    EXPECT_TRUE(rep.cells[3].failed);
    EXPECT_TRUE(rep.cells[4].failed);
    EXPECT_FALSE(rep.cells[5].failed);
    EXPECT_EQ(rep.failed[0], 2);
  }
}

TEST(Variants, SharedBaselinesUseTheirTgSource) {
  const Artifacts pmtg = run_variant(fixtures::tiny_config(Variant::PMTG_Enc));
  for (const auto& tg : pmtg.tgs) EXPECT_EQ(*tg, fixed_pmtg_tg());
  EXPECT_EQ(pmtg.used.tg_evals, 0);
  EXPECT_EQ(pmtg.policies.size(), 1u);

  const ExperimentConfig cfg = fixtures::tiny_config(Variant::CMAES_Enc);
  const Artifacts cma = run_variant(cfg);
  ASSERT_EQ(cma.cma.size(), 1u);
  for (const auto& tg : cma.tgs) EXPECT_EQ(*tg, *cma.tgs[0]);
  EXPECT_EQ(*cma.tgs[0], tg_from_unit(cma.cma[0].state.mean));
  EXPECT_EQ(cma.used.tg_evals, cfg.budget().tg_opt_evals);
  EXPECT_EQ(cma.used.policy_evals, cfg.budget().policy_opt_evals);
}

TEST(Evaluate, ShapeAndNoiselessReplications) {
  const ExperimentConfig cfg = fixtures::tiny_config(Variant::PMTG_Enc);
  const Artifacts art = run_variant(cfg);
  EvalProtocol p;
  p.reps = 3;
  p.noise_std = 0.0;
  const EvalReport rep = evaluate(art, p, cfg.sim, cfg.reward);
  std::size_t rows = 0;
  for (const auto& c : rep.cells) {
    ASSERT_FALSE(c.failed);
    rows += c.returns.size();
    EXPECT_EQ(c.returns[0], c.returns[1]);
    EXPECT_EQ(c.returns[0], c.returns[2]);
  }
  EXPECT_EQ(rows, static_cast<std::size_t>(kNumCells * 3));

  p.noise_std = 0.05;
  const EvalReport a = evaluate(art, p, cfg.sim, cfg.reward);
  const EvalReport b = evaluate(art, p, cfg.sim, cfg.reward, 3);
  for (int c = 0; c < kNumCells; ++c) {
    EXPECT_EQ(a.cells[c].returns, b.cells[c].returns);
    EXPECT_EQ(a.cells[c].seeds, b.cells[c].seeds);
  }
  EXPECT_EQ(a.aggregate_median, b.aggregate_median);
}

TEST(Evaluate, MedianOfConstantCells) {
  EvalReport rep;
  for (int c = 0; c < kNumCells; ++c) rep.cells[c].mean = 2.5 + (c / kNumVariations);
  rep = summarize_cells(rep);
  for (int t = 0; t < kNumEnvTypes; ++t) EXPECT_EQ(rep.types[t].median, 2.5 + t);
  EXPECT_EQ(rep.aggregate_median, 4.0);
}

TEST(Evaluate, MissingTgMarksTheCellFailed) {
  const ExperimentConfig cfg = fixtures::tiny_config(Variant::PMTG_Enc);
  Artifacts art = run_variant(cfg);
  art.tgs[41].reset();
  const EvalReport rep = evaluate(art, {2, 0.05, 1}, cfg.sim, cfg.reward);
  EXPECT_TRUE(rep.cells[41].failed);
  EXPECT_EQ(rep.cells[41].reason, "no TG for this cell");
  EXPECT_TRUE(rep.cells[41].returns.empty());
  EXPECT_EQ(rep.failed[2], 1);
  EXPECT_EQ(rep.types[2].count, 19);
}

// Paired before/after: the trained policy against the zero policy on the same
// archive, cells and seeds.
TEST(Training, EetgPolicyBeatsTheOpenLoopPriorOnFiveSeeds) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig cfg;
    cfg.variant = Variant::EETG;
    cfg.master_seed = seed;
    cfg.scale_factor = 0.002;
    const Artifacts art = run_variant(cfg);
    EXPECT_EQ(art.used.tg_evals, cfg.budget().tg_opt_evals);
    EXPECT_EQ(art.used.policy_evals, cfg.budget().policy_opt_evals);
    Artifacts zero = art;
    zero.policies[0].policy = make_initial_policy(art.policies[0].policy.layout);
    EvalProtocol p;
    p.reps = 5;
    p.seed = seed * 17;
    const double post = filled_mean(evaluate(art, p, cfg.sim, cfg.reward));
    const double pre = filled_mean(evaluate(zero, p, cfg.sim, cfg.reward));
    EXPECT_GE(post, pre) << "seed " << seed;
  }
}
