#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "coexist/learners.hpp"

using namespace coexist;

namespace {

FeatureVector vec(std::initializer_list<double> xs) {
  FeatureVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

struct Update {
  FeatureVector x;
  double r;
};

std::vector<Update> random_updates(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Update> out;
  for (int i = 0; i < n; ++i) {
    FeatureVector x(d);
    for (int j = 0; j < d; ++j) x[j] = u(rng);
    out.push_back({x, u(rng)});
  }
  return out;
}

}  // namespace

TEST(Context, DefaultsForUnplayedArm) {
  HistoryBuffer h(3, 500, 0.99);
  const auto x = assemble_context(h, 1, 10);
  EXPECT_EQ(x, vec({0.5, 0.25, 0.5}));
}

TEST(Context, SingleRewardKeepsVarianceDefault) {
  HistoryBuffer h(1, 500, 1.0);
  h.record(0, 3, 1.0);
  EXPECT_EQ(assemble_context(h, 0, 4), vec({1.0, 0.25, 1.0}));
}

TEST(Context, TwoRewardsEqualRecency) {
  HistoryBuffer h(1, 500, 1.0);
  h.record(0, 5, 1.0);
  h.record(0, 5, 0.5);
  const auto x = assemble_context(h, 0, 5);
  EXPECT_NEAR(x[0], 0.75, 1e-15);
  EXPECT_NEAR(x[1], 0.125, 1e-15);
  EXPECT_EQ(x[2], 0.5);
}

TEST(Context, DiscountWeights) {
  HistoryBuffer h(1, 500, 0.5);
  h.record(0, 0, 1.0);  // weight 0.25 at now = 2
  h.record(0, 1, 0.0);  // weight 0.5
  h.record(0, 2, 0.4);  // weight 1
  const auto x = assemble_context(h, 0, 2);
  const double w[] = {0.25, 0.5, 1.0}, r[] = {1.0, 0.0, 0.4};
  double ws = 0, m = 0;
  for (int i = 0; i < 3; ++i) {
    ws += w[i];
    m += w[i] * r[i];
  }
  m /= ws;
  double v = 0;
  for (int i = 0; i < 3; ++i) v += w[i] * (r[i] - m) * (r[i] - m);
  v = v / ws * 3.0 / 2.0;
  EXPECT_NEAR(x[0], m, 1e-15);
  EXPECT_NEAR(x[1], v, 1e-15);
  EXPECT_EQ(x[2], 0.4);
}

TEST(History, WindowDropsOldRecords) {
  HistoryBuffer h(2, 10, 1.0);
  h.record(0, 0, 1.0);
  h.record(0, 5, 0.0);
  EXPECT_EQ(h.play_count(0, 10), 2u);
  EXPECT_EQ(h.play_count(0, 11), 1u);
  EXPECT_EQ(assemble_context(h, 0, 11)[0], 0.0);
  h.prune(11);
  EXPECT_EQ(h.records(0).size(), 1u);
  h.prune(16);
  EXPECT_TRUE(h.records(0).empty());
  EXPECT_EQ(assemble_context(h, 0, 16), vec({0.5, 0.25, 0.5}));
  EXPECT_THROW(HistoryBuffer(1, 0, 0.9), Error);
  EXPECT_THROW(HistoryBuffer(1, 5, 0.0), Error);
}

TEST(Posterior, ClosedFormFirstUpdate) {
  LinearPosterior p(2, 1.0);
  p.update(vec({1, 0}), 1.0);
  EXPECT_EQ(p.precision(), (Eigen::Matrix2d() << 2, 0, 0, 1).finished());
  EXPECT_NEAR((p.covariance_factor() - (Eigen::Matrix2d() << 0.5, 0, 0, 1).finished()).cwiseAbs().maxCoeff(),
              0.0, 1e-15);
  EXPECT_EQ(p.response(), vec({1, 0}));
  EXPECT_NEAR((p.theta_hat() - vec({0.5, 0})).norm(), 0.0, 1e-15);
}

TEST(Posterior, NonFiniteInputFails) {
  LinearPosterior p(3, 1.0);
  EXPECT_THROW(p.update(vec({1, NAN, 0}), 0.5), Error);
  EXPECT_THROW(p.update(vec({1, 0, 0}), INFINITY), Error);
  EXPECT_THROW(p.update(vec({1, 0}), 0.5), Error);
}

TEST(Posterior, ShermanMorrisonAgainstDirectInverse) {
  LinearPosterior p(3, 0.5);
  for (const auto& u : random_updates(10000, 3, 42)) {
    p.update(u.x, u.r);
  }
  const Eigen::MatrixXd direct = p.precision().inverse();
  EXPECT_LE((p.covariance_factor() - direct).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((p.precision() * p.covariance_factor() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((p.theta_hat() - p.covariance_factor() * p.response()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Posterior, InvariantsHoldAfterEveryUpdate) {
  LinearPosterior p(3, 0.5);
  for (const auto& u : random_updates(500, 3, 7)) {
    p.update(u.x, u.r);
    ASSERT_LE((p.precision() * p.covariance_factor() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
    ASSERT_LE((p.theta_hat() - p.covariance_factor() * p.response()).cwiseAbs().maxCoeff(), 1e-10);
    ASSERT_LE((p.precision() - p.precision().transpose()).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Posterior, MatchesBatchFormulas) {
  const auto ups = random_updates(2000, 3, 9);
  LinearPosterior p(3, 0.5);
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(3);
  for (const auto& u : ups) {
    p.update(u.x, u.r);
    B += u.x * u.x.transpose();
    f += u.x * u.r;
  }
  const Eigen::VectorXd theta = B.ldlt().solve(f);
  EXPECT_LE((p.precision() - B).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((p.response() - f).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((p.theta_hat() - theta).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Posterior, UpdateOrderDoesNotMatter) {
  auto ups = random_updates(1000, 3, 11);
  LinearPosterior a(3, 0.5);
  for (const auto& u : ups) a.update(u.x, u.r);
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(ups.begin(), ups.end(), rng);
    LinearPosterior b(3, 0.5);
    for (const auto& u : ups) b.update(u.x, u.r);
    EXPECT_LT((a.theta_hat() - b.theta_hat()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Posterior, ZeroScaleSamplesTheMean) {
  LinearPosterior p(3, 0.0);
  for (const auto& u : random_updates(20, 3, 1)) p.update(u.x, u.r);
  Rng rng(3);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(sample_theta(p, rng), p.theta_hat());
}

TEST(Posterior, ScalarSampleVariance) {
  LinearPosterior p(1, 1.0);
  // B = 1 + 3 = 4 with zero reward keeps theta_hat at 0.
  p.update(vec({std::sqrt(3.0)}), 0.0);
  ASSERT_NEAR(p.precision()(0, 0), 4.0, 1e-12);
  Rng rng(5);
  const int n = 100000;
  double s = 0, s2 = 0;
  for (int k = 0; k < n; ++k) {
    const double x = p.sample(rng)[0];
    s += x;
    s2 += x * x;
  }
  const double m = s / n;
  EXPECT_NEAR(s2 / n - m * m, 0.25, 0.01);
}

TEST(Posterior, IdentityCovarianceSamples) {
  LinearPosterior p(3, 1.0);
  Rng rng(6);
  const int n = 100000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(3, 3);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
  std::vector<Eigen::VectorXd> xs;
  xs.reserve(n);
  for (int k = 0; k < n; ++k) {
    xs.push_back(p.sample(rng));
    mean += xs.back();
  }
  mean /= n;
  for (const auto& x : xs) acc += (x - mean) * (x - mean).transpose();
  acc /= n - 1;
  EXPECT_LE((acc - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Constrain, Examples) {
  const std::vector<FeatureVector> ctx{vec({0.8, 0, 0}), vec({0.2, 0, 0})};
  const auto theta = vec({1, 0, 0});
  EXPECT_EQ(constrain_actions(ctx, theta, std::nullopt), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(constrain_actions(ctx, theta, 0.5), (std::vector<std::size_t>{0}));
  // Fresh posterior predicts 0 everywhere: nothing passes, everything allowed.
  EXPECT_EQ(constrain_actions(ctx, Eigen::VectorXd::Zero(3), 0.1), (std::vector<std::size_t>{0, 1}));
}

TEST(ThompsonSelect, ArgmaxAndTieBreak) {
  const std::vector<FeatureVector> ctx{vec({0.2, 0, 0}), vec({0.9, 0, 0}), vec({0.5, 0, 0})};
  const std::vector<std::size_t> all{0, 1, 2};
  EXPECT_EQ(argmax_score(ctx, vec({1, 0, 0}), all), 1u);
  const std::vector<FeatureVector> same(4, vec({0.3, 0.1, 0.3}));
  const std::vector<std::size_t> four{0, 1, 2, 3};
  EXPECT_EQ(argmax_score(same, vec({1, -1, 1}), four), 0u);
}

TEST(ThompsonSelect, PositiveScalingKeepsChoice) {
  Rng rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::size_t> all(55);
  std::iota(all.begin(), all.end(), 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<FeatureVector> ctx;
    for (int k = 0; k < 55; ++k) ctx.push_back(vec({u(rng), u(rng), u(rng)}));
    const auto theta = vec({u(rng), u(rng), u(rng)});
    const auto k = argmax_score(ctx, theta, all);
    for (double c : {1e-3, 0.5, 7.0, 1e4}) EXPECT_EQ(argmax_score(ctx, (c * theta).eval(), all), k);
  }
}

TEST(ThompsonSelect, FreshStateChoosesFirstArm) {
  LinearPosterior post(kContextDim, 0.5);
  HistoryBuffer h(55, 500, 0.99);
  Rng rng(1);
  std::vector<FeatureVector> ctx;
  EXPECT_EQ(ts_select(post, h, 0, rng, std::nullopt, &ctx), 0u);
  EXPECT_EQ(ctx.size(), 55u);
}

TEST(ThompsonAgent, InitialSweepVisitsEveryArmInOrder) {
  AgentConfig cfg;
  ThompsonAgent agent(55, cfg);
  Rng rng(2);
  for (std::int64_t t = 0; t < 55; ++t) {
    EXPECT_EQ(agent.select(t, rng), static_cast<std::size_t>(t));
    agent.observe(static_cast<std::size_t>(t), 0.5, t);
  }
  EXPECT_EQ(agent.posterior().precision()(0, 0), 1.0 + 55 * 0.25);
}

// Static occupancy at {1,2}: the best arm is [3,9].
TEST(ThompsonAgent, ConvergesOnStaticChannel) {
  const auto space = enumerate_actions(10);
  std::vector<std::uint8_t> occ(10, 0);
  occ[1] = occ[2] = 1;
  const RewardParams params;
  const auto best = *find_action(space, Action(3, 9, 10));
  std::vector<double> rewards;
  for (const auto& a : space) rewards.push_back(evaluate(a, occ, params).reward);
  for (double v : {0.5, 2.0}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      AgentConfig cfg;
      cfg.v = v;
      ThompsonAgent agent(space.size(), cfg);
      Rng rng(seed);
      int hits = 0;
      for (std::int64_t t = 0; t < 10000; ++t) {
        const auto k = agent.select(t, rng);
        agent.observe(k, rewards[k], t);
        if (t >= 9000) hits += k == best;
      }
      EXPECT_GE(hits, 950) << "v=" << v << " seed=" << seed;
    }
  }
}

TEST(Ucb1, PlaysEveryArmFirst) {
  ArmStats s(55);
  EXPECT_EQ(ucb1_select(s, 1), 0u);
  s.record(0, 1.0);
  s.record(2, 1.0);
  EXPECT_EQ(ucb1_select(s, 3), 1u);
  EXPECT_THROW(ucb1_select(s, 0), Error);
}

TEST(Ucb1, Radius) {
  EXPECT_NEAR(ucb1_radius(8, 2), std::sqrt(std::log(8.0)), 1e-15);
  EXPECT_NEAR(ucb1_radius(8, 2), 1.44202, 1e-5);
}

TEST(Ucb1, MeanDominatesWithManyPlays) {
  ArmStats s(2);
  for (int i = 0; i < 1000; ++i) {
    s.record(0, 0.9);
    s.record(1, 0.1);
  }
  EXPECT_EQ(ucb1_select(s, 2000), 0u);
}

TEST(Ucb1, DeterministicGivenHistory) {
  Ucb1Agent a(10), b(10);
  Rng ra(1), rb(999);
  for (std::int64_t t = 0; t < 300; ++t) {
    const auto ka = a.select(t, ra), kb = b.select(t, rb);
    ASSERT_EQ(ka, kb);
    const double r = 0.1 * static_cast<double>(ka % 7);
    a.observe(ka, r, t);
    b.observe(kb, r, t);
  }
}

TEST(EpsGreedy, ScheduleReachesFloor) {
  EpsilonSchedule s(0.95, 0.001, 0.0);
  EXPECT_EQ(s.at(0), 0.95);
  EXPECT_NEAR(s.at(500), 0.45, 1e-12);
  for (std::int64_t t = 950; t < 2000; ++t) ASSERT_EQ(s.at(t), 0.0);
  EpsilonSchedule f(0.5, 0.1, 0.05);
  EXPECT_EQ(f.at(100), 0.05);
}

// Chi-square critical value by the Wilson-Hilferty approximation.
TEST(EpsGreedy, FullExplorationIsUniform) {
  HistoryBuffer h(55, 500, 0.99);
  h.record(3, 0, 1.0);
  Rng rng(77);
  const int n = 100000;
  std::vector<int> counts(55, 0);
  for (int i = 0; i < n; ++i) ++counts[eps_greedy_select(h, 1, 1.0, rng)];
  const double expected = static_cast<double>(n) / 55.0;
  double chi2 = 0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const double k = 54, z99 = 2.326348;
  const double crit = k * std::pow(1 - 2 / (9 * k) + z99 * std::sqrt(2 / (9 * k)), 3);
  EXPECT_LT(chi2, crit);
}

TEST(EpsGreedy, ZeroEpsilonIsGreedy) {
  HistoryBuffer h(4, 500, 0.99);
  h.record(0, 0, 0.2);
  h.record(1, 0, 0.9);
  h.record(2, 0, 0.3);
  h.record(3, 0, 0.4);
  Rng a(1), b(2);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(eps_greedy_select(h, 1, 0.0, a), 1u);
    EXPECT_EQ(eps_greedy_select(h, 1, 0.0, b), 1u);
  }
}

TEST(Regret, Examples) {
  EXPECT_EQ(regret(1.0, 1.0), 0.0);
  EXPECT_NEAR(regret(1.0, 0.4545), 0.5455, 1e-12);
}

TEST(Agents, FixedFullBandAndFactory) {
  const auto space = enumerate_actions(10);
  AgentConfig cfg;
  cfg.kind = AgentKind::fixed_full_band;
  auto agent = make_agent(cfg, space);
  Rng rng(1);
  for (std::int64_t t = 0; t < 20; ++t) EXPECT_EQ(space[agent->select(t, rng)], Action(0, 9, 10));
  for (auto k : {AgentKind::thompson, AgentKind::ucb1, AgentKind::eps_greedy, AgentKind::fixed_full_band}) {
    cfg.kind = k;
    EXPECT_EQ(make_agent(cfg, space)->kind(), k);
    EXPECT_EQ(parse_agent_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_agent_kind("greedy"), Error);
}

TEST(Agents, EverySelectionIsInTheActionSpace) {
  const auto space = enumerate_actions(6);
  Rng env(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto k : {AgentKind::thompson, AgentKind::ucb1, AgentKind::eps_greedy, AgentKind::fixed_full_band}) {
    AgentConfig cfg;
    cfg.kind = k;
    cfg.r_hat = 0.3;
    auto agent = make_agent(cfg, space);
    Rng rng(9);
    for (std::int64_t t = 0; t < 500; ++t) {
      const auto a = agent->select(t, rng);
      ASSERT_LT(a, space.size());
      agent->observe(a, u(env), t);
    }
  }
}

TEST(AgentConfig, Validation) {
  AgentConfig c;
  EXPECT_NO_THROW(c.validate());
  c.v = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.eps0 = -0.1;
  EXPECT_THROW(c.validate(), Error);
}
