#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "eetg/policy.hpp"
#include "eetg/rollout.hpp"
#include "eetg/training.hpp"
#include "support.hpp"

using namespace eetg;

namespace {

std::vector<PolicyLayout> all_layouts() {
  std::vector<PolicyLayout> out;
  for (bool cond : {false, true})
    for (auto enc : {EnvEncoding::None, EnvEncoding::Compact, EnvEncoding::OneHot})
      for (int hidden : {0, 8}) {
        PolicyLayout l;
        l.tg_conditioned = cond;
        l.encoding = enc;
        l.hidden = hidden;
        out.push_back(l);
      }
  return out;
}

}  // namespace

TEST(Layout, Dimensions) {
  PolicyLayout l;
  EXPECT_EQ(l.input_dim(), 33 + 8 + 4 + 3);
  EXPECT_EQ(l.param_dim(), 48 * 16 + 16);
  l.tg_conditioned = true;
  EXPECT_EQ(l.input_dim(), 53);
  l.encoding = EnvEncoding::Compact;
  EXPECT_EQ(l.input_dim(), 58);
  l.encoding = EnvEncoding::OneHot;
  EXPECT_EQ(l.input_dim(), 133);
  l.hidden = 64;
  EXPECT_EQ(l.param_dim(), 64 * 133 + 64 + 16 * 64 + 16);
  for (const auto& layout : all_layouts())
    EXPECT_EQ(static_cast<int>(layout.input_names().size()), layout.input_dim());
}

TEST(Layout, EncodingNamesRoundTrip) {
  for (auto e : {EnvEncoding::None, EnvEncoding::Compact, EnvEncoding::OneHot})
    EXPECT_EQ(parse_env_encoding(env_encoding_name(e)), e);
  EXPECT_THROW(parse_env_encoding("binary"), std::invalid_argument);
}

TEST(Input, AssemblyOrder) {
  PolicyLayout l;
  l.tg_conditioned = true;
  l.encoding = EnvEncoding::Compact;
  RobotObs obs;
  for (int i = 0; i < kObsDim; ++i) obs[i] = 100 + i;
  TGState st;
  st.phase = {0.0, 1.0, 2.0, 3.0};
  st.freq = {1.0, 1.1, 1.2, 1.3};
  const TGParams tg{0.01, 0.02, 0.03, 0.04, 2.5};
  const EnvCell cell = make_cell(EnvType::Uneven, 19);
  const Eigen::VectorXd in = assemble_input(l, obs, st, tg, cell);
  ASSERT_EQ(in.size(), 58);
  EXPECT_EQ(in.head<33>(), obs);
  EXPECT_EQ(in[33], std::sin(0.0));
  EXPECT_EQ(in[34], std::cos(0.0));
  EXPECT_EQ(in[39], std::sin(3.0));
  EXPECT_EQ(in[41], 1.0);
  EXPECT_EQ(in[44], 1.3);
  EXPECT_EQ(in[45], 0.01);
  EXPECT_EQ(in[47], 0.03);
  EXPECT_EQ(in[48], 0.01);
  EXPECT_EQ(in[52], 2.5);
  EXPECT_EQ(in.segment<4>(53), Eigen::Vector4d(0, 0, 1, 0));
  EXPECT_EQ(in[57], 1.0);

  l.encoding = EnvEncoding::OneHot;
  const Eigen::VectorXd hot = assemble_input(l, obs, st, tg, cell);
  EXPECT_EQ(hot.tail<80>().sum(), 1.0);
  EXPECT_EQ(hot[53 + cell.index()], 1.0);
}

TEST(Input, ConditioningReachesPolicy) {
  PolicyLayout l;
  l.tg_conditioned = true;
  const RobotObs obs = RobotObs::Constant(0.2);
  const TGState st = initial_tg_state(gait_offsets(Gait::Trot));
  const EnvCell cell = make_cell(EnvType::Slope, 3);
  // same swing/turn/lift, different gait and offset: only the conditioning sees it
  const TGParams a{0.04, 0.01, 0.1, 0.0, 1.0};
  const TGParams b{0.04, 0.01, 0.1, 0.05, 3.0};
  const auto ia = assemble_input(l, obs, st, a, cell);
  const auto ib = assemble_input(l, obs, st, b, cell);
  EXPECT_NE(ia, ib);
  l.tg_conditioned = false;
  EXPECT_EQ(assemble_input(l, obs, st, a, cell), assemble_input(l, obs, st, b, cell));
}

TEST(Compose, Examples) {
  FootTargets nominal;
  nominal.fill(Eigen::Vector3d(0.03, 0.0, -0.27));
  PolicyOutput zero;
  EXPECT_EQ(compose_targets(nominal, zero, 0.35), nominal);

  PolicyOutput out;
  out.foot_residuals[0] = Eigen::Vector3d(0.05, 0.0, 0.0);
  const FootTargets t = compose_targets(nominal, out, 0.35);
  EXPECT_NEAR((t[0] - Eigen::Vector3d(0.08, 0.0, -0.27)).norm(), 0.0, 1e-15);
  EXPECT_EQ(t[1], nominal[1]);

  out.foot_residuals[0] = Eigen::Vector3d(0.2, 0.0, 0.0);
  EXPECT_NEAR(compose_targets(nominal, out, 0.35)[0].x(), 0.08, 1e-15);

  Eigen::VectorXd raw = Eigen::VectorXd::Zero(16);
  raw[0] = 0.2;
  raw[12] = -3.0;
  const PolicyOutput c = clamp_output(raw);
  EXPECT_EQ(c.foot_residuals[0].x(), 0.05);
  EXPECT_EQ(c.freq_residuals[0], -0.625);
}

TEST(Forward, ZeroParamsGiveZeroResiduals) {
  Rng rng(1);
  for (const auto& l : all_layouts()) {
    const Policy p = make_initial_policy(l, 7);
    for (int k = 0; k < 20; ++k) {
      const PolicyOutput out = p.forward(fixtures::random_vector(rng, l.input_dim(), 3.0));
      for (int i = 0; i < kNumLegs; ++i) {
        EXPECT_EQ(out.foot_residuals[i], Eigen::Vector3d::Zero());
        EXPECT_EQ(out.freq_residuals[i], 0.0);
      }
    }
  }
}

TEST(Forward, OneHotInputSelectsColumnPlusBias) {
  PolicyLayout l;
  Rng rng(4);
  const Eigen::VectorXd params = fixtures::random_vector(rng, l.param_dim(), 1.0);
  const int in = l.input_dim();
  for (int j = 0; j < in; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(in);
    e[j] = 1.0;
    const Eigen::VectorXd y = raw_forward(l, params, e);
    for (int r = 0; r < kPolicyOutputDim; ++r)
      EXPECT_EQ(y[r], params[j * kPolicyOutputDim + r] + params[in * kPolicyOutputDim + r]);
  }
  // through forward: scaled, then clamped
  const Policy p{l, params, RunningStats(in)};
  Eigen::VectorXd e = Eigen::VectorXd::Zero(in);
  e[5] = 1.0;
  const Eigen::VectorXd y = raw_forward(l, params, e);
  const PolicyOutput out = p.forward(e);
  for (int a = 0; a < 3; ++a)
    EXPECT_DOUBLE_EQ(out.foot_residuals[1][a], std::clamp(y[3 + a] * l.foot_scale, -0.05, 0.05));
  EXPECT_DOUBLE_EQ(out.freq_residuals[2], std::clamp(y[14] * l.freq_scale, -0.625, 0.625));
}

TEST(Forward, FuzzStaysInsideClampBox) {
  Rng rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto layouts = all_layouts();
  for (int trial = 0; trial < 10000; ++trial) {
    const PolicyLayout& l = layouts[trial % layouts.size()];
    const double scale = std::pow(10.0, 4 * u(rng) - 2);
    Policy p{l, fixtures::random_vector(rng, l.param_dim(), scale), RunningStats(l.input_dim())};
    Eigen::VectorXd x = fixtures::random_vector(rng, l.input_dim(), 10.0 * scale);
    if (trial % 97 == 0) x[trial % x.size()] = std::numeric_limits<double>::quiet_NaN();
    if (trial % 89 == 0) p.params[trial % p.params.size()] = std::numeric_limits<double>::infinity();
    const PolicyOutput out = p.forward(x);
    for (int i = 0; i < kNumLegs; ++i) {
      ASSERT_TRUE(out.foot_residuals[i].allFinite());
      ASSERT_LE(out.foot_residuals[i].cwiseAbs().maxCoeff(), kMaxFootResidual);
      ASSERT_TRUE(std::isfinite(out.freq_residuals[i]));
      ASSERT_LE(std::abs(out.freq_residuals[i]), kMaxFreqResidual);
    }
  }
}

TEST(Forward, DimensionMismatchIsRejected) {
  PolicyLayout l;
  const Policy p = make_initial_policy(l);
  EXPECT_THROW(p.forward(Eigen::VectorXd::Zero(l.input_dim() + 1)), std::invalid_argument);
  Policy bad = p;
  bad.params.resize(3);
  EXPECT_THROW(bad.check(), std::invalid_argument);
  bad = p;
  bad.normalizer = RunningStats(2);
  EXPECT_THROW(bad.check(), std::invalid_argument);
}

TEST(OpenLoop, ZeroPolicyMatchesNoPolicyBitExactly) {
  SimConfig cfg;
  cfg.max_episode_s = 3.0;
  RewardWeights w;
  Rng rng(12);
  const auto layouts = all_layouts();
  for (std::size_t k = 0; k < layouts.size(); ++k) {
    const TGParams tg = fixtures::random_tg(rng);
    const EnvCell cell = cell_from_index(static_cast<int>(rng() % kNumCells));
    const Policy p = make_initial_policy(layouts[k], 5);
    const std::uint64_t seed = rng();
    EXPECT_EQ(rollout({tg, &p, cell, 0.05, seed}, cfg, w), rollout({tg, nullptr, cell, 0.05, seed}, cfg, w));
  }
}

TEST(Normalizer, MergeMatchesSequentialPush) {
  Rng rng(8);
  RunningStats all(3), a(3), b(3);
  for (int i = 0; i < 500; ++i) {
    const Eigen::VectorXd x = fixtures::random_vector(rng, 3, 2.0);
    all.push(x);
    (i < 200 ? a : b).push(x);
  }
  a.merge(b);
  EXPECT_EQ(a.count(), all.count());
  EXPECT_LT((a.mean() - all.mean()).norm(), 1e-12);
  EXPECT_LT((a.variance() - all.variance()).norm(), 1e-10);
  RunningStats empty(3);
  empty.merge(all);
  EXPECT_EQ(empty, all);
}

TEST(Normalizer, StandardNormalMeanShrinks) {
  Rng rng(21);
  for (int m : {100, 1000, 10000}) {
    RunningStats s(6);
    for (int i = 0; i < m; ++i) s.push(fixtures::random_vector(rng, 6, 1.0));
    for (int d = 0; d < 6; ++d) EXPECT_LT(std::abs(s.mean()[d]), 4.0 / std::sqrt(m));
    EXPECT_NEAR(s.variance().mean(), 1.0, 0.15);
  }
}

TEST(Normalizer, ConstantDimensionsKeepUnitScale) {
  RunningStats s(2);
  for (int i = 0; i < 10; ++i) s.push(Eigen::Vector2d(3.0, i));
  const Eigen::VectorXd n = s.normalize(Eigen::Vector2d(5.0, 4.5));
  EXPECT_DOUBLE_EQ(n[0], 2.0);
  EXPECT_NEAR(n[1], 0.0, 1e-12);
  EXPECT_EQ(RunningStats(2).normalize(Eigen::Vector2d(7.0, 8.0)), Eigen::Vector2d(7.0, 8.0));
}

TEST(Training, ZeroBudgetLeavesPolicyUntouched) {
  PolicyLayout l;
  l.tg_conditioned = true;
  const Policy init = make_initial_policy(l);
  ArsState st = make_ars_state(init, ArsConfig{});
  TrainingOptions opt;
  opt.budget = 0;
  const auto stats = train_policy(st, l, {{make_cell(EnvType::Slope, 0), fixed_pmtg_tg()}}, SimConfig{},
                                  RewardWeights{}, opt);
  EXPECT_EQ(stats.rollouts, 0);
  EXPECT_EQ(policy_from_state(l, st), init);
  EXPECT_THROW(train_policy(st, l, {}, SimConfig{}, RewardWeights{}, opt), std::invalid_argument);
}

TEST(Training, SpendsExactBudgetAndIsDeterministic) {
  PolicyLayout l;
  SimConfig sim;
  sim.max_episode_s = 1.0;
  const std::vector<TrainingTask> tasks{{make_cell(EnvType::Slope, 4), fixed_pmtg_tg()},
                                        {make_cell(EnvType::Beam, 12), fixed_pmtg_tg()}};
  TrainingOptions opt;
  opt.budget = 37;  // odd: the last rollout cannot form a pair
  opt.seed = 5;
  ArsConfig ars;
  ars.directions = 8;
  ars.top = 4;
  ArsState a = make_ars_state(make_initial_policy(l), ars);
  ArsState b = make_ars_state(make_initial_policy(l), ars);
  const auto sa = train_policy(a, l, tasks, sim, RewardWeights{}, opt);
  opt.workers = 3;
  const auto sb = train_policy(b, l, tasks, sim, RewardWeights{}, opt);
  EXPECT_EQ(sa.rollouts, 36);
  EXPECT_EQ(sa.iterations, 3);  // 16 + 16 + 4
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.normalizer, b.normalizer);
  EXPECT_EQ(sb.rollouts, sa.rollouts);
  EXPECT_GT(a.normalizer.count(), 0.0);
}
