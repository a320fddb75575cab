#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "bandit_forest/agents.hpp"
#include "bandit_forest/environments.hpp"
#include "oracles.hpp"

namespace bf = bandit_forest;

namespace {

bf::BftsConfig small_bfts(int K, int P, std::uint64_t seed) {
  bf::BftsConfig c;
  c.num_arms = K;
  c.num_features = P;
  c.sampler.prior.m = 5;
  c.sampler.n_burn = 5;
  c.sampler.n_post = 6;
  c.sampler.n_chains = 2;
  c.tau = 2;
  c.seed = seed;
  c.policy = bf::ExecutionPolicy::Serial;
  return c;
}

// Runs an agent on a fixed synthetic stream and returns its actions.
std::vector<int> play(bf::Agent& agent, const bf::InteractionStream& s, long T) {
  std::vector<int> actions;
  for (long t = 0; t < T; ++t) {
    const auto x = s.contexts.row(t);
    const int a = agent.select(x);
    actions.push_back(a);
    agent.update(x, a, s.rewards(t, a));
  }
  return actions;
}

bf::InteractionStream friedman_stream(long T, std::uint64_t seed) {
  bf::Rng rng(seed);
  bf::SyntheticEnv env(bf::scenario_by_name("friedman"), rng);
  return env.materialize(T, rng);
}

// Fixed two-draw posterior for argmax checks.
class TableModel : public bf::ArmPredictor {
 public:
  explicit TableModel(std::vector<std::vector<double>> v) : v_(std::move(v)) {}
  std::size_t num_draws() const override { return v_.size(); }
  int num_arms() const override { return int(v_[0].size()); }
  double predict(std::size_t d, int a, std::span<const double>) const override { return v_[d][a]; }

 private:
  std::vector<std::vector<double>> v_;
};

}  // namespace

TEST(RefreshSchedule, IndexExamples) {
  const auto log8 = bf::RefreshSchedule::logarithmic(8);
  EXPECT_EQ(bf::refresh_index(1, log8), 0);
  EXPECT_EQ(bf::refresh_index(2, log8), 6);
  EXPECT_EQ(bf::refresh_index(3, log8), 9);
  EXPECT_EQ(bf::refresh_index(10000, log8), 74);
  EXPECT_EQ(bf::refresh_index(9, bf::RefreshSchedule::square_root(2)), 6);
  EXPECT_EQ(bf::refresh_index(9, bf::RefreshSchedule::every_n(4)), 2);
}

TEST(RefreshSchedule, MatchesDirectEnumeration) {
  const auto rounds = bf::refresh_increase_rounds(bf::RefreshSchedule::logarithmic(8), 10000);
  EXPECT_EQ(rounds, oracles::log_schedule_rounds(8, 10000));
  // r(t) is nondecreasing.
  for (long t = 2; t <= 10000; ++t)
    ASSERT_GE(bf::refresh_index(t, bf::RefreshSchedule::logarithmic(8)),
              bf::refresh_index(t - 1, bf::RefreshSchedule::logarithmic(8)));
}

TEST(RefreshSchedule, FiresAtTauK) {
  const auto log8 = bf::RefreshSchedule::logarithmic(8);
  EXPECT_TRUE(bf::refresh_fires(10, 10, log8));
  EXPECT_FALSE(bf::refresh_fires(5, 10, log8));
  EXPECT_TRUE(bf::refresh_fires(11, 10, log8));  // ceil(8 ln 11) = 20 > ceil(8 ln 10) = 19
  EXPECT_FALSE(bf::refresh_fires(10000, 10, log8));  // both rounds give 74
}

TEST(Encoding, Layouts) {
  const std::vector<double> x = {0.3, 0.7};
  EXPECT_EQ(bf::encode(x, 1, 3, bf::Encoding::Multi), (std::vector<double>{0, 0, 0.3, 0.7, 0, 0}));
  EXPECT_EQ(bf::encode(x, 2, 3, bf::Encoding::OneHot), (std::vector<double>{0, 0, 1, 0.3, 0.7}));
  EXPECT_EQ(bf::encode(x, 2, 3, bf::Encoding::Separate), x);
  EXPECT_EQ(bf::encoded_dim(4, 3, bf::Encoding::Multi), 12u);
}

TEST(Argmax, TiesGoToLowestIndex) {
  EXPECT_EQ(bf::argmax_min_index(std::vector<double>{1.0, 0.5}), 0);
  EXPECT_EQ(bf::argmax_min_index(std::vector<double>{0.5, 0.5}), 0);
  EXPECT_EQ(bf::argmax_min_index(std::vector<double>{0.1, 0.5, 0.5}), 1);
}

TEST(Argmax, ShiftInvariantVotes) {
  const TableModel base({{1.0, 0.5}, {0.2, 0.9}, {0.3, 0.3}});
  const TableModel shifted({{11.0, 10.5}, {-9.8, -9.1}, {4.3, 4.3}});
  const std::vector<double> x = {0.0};
  EXPECT_EQ(bf::estimate_policy_dist(base, x), bf::estimate_policy_dist(shifted, x));
  EXPECT_EQ(bf::best_arm_value(base, 1, x), 0.9);
}

TEST(FeelGood, SoftmaxArithmetic) {
  const auto p = bf::fg_selection_probs(std::vector<double>{0.0, std::log(3.0)}, 1.0);
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
  EXPECT_EQ(bf::fg_selection_probs(std::vector<double>{5, 5, 5}, 3.0), std::vector<double>(3, 1.0 / 3.0));
  const auto huge = bf::fg_selection_probs(std::vector<double>{1e6, 1e6 + 1.0}, 1.0);
  EXPECT_TRUE(std::isfinite(huge[0]));
}

TEST(FeelGood, LambdaZeroIsUniform) {
  const auto w = bf::fg_selection_probs(std::vector<double>{0.0, 3.0, 100.0, -2.0}, 0.0);
  bf::Rng rng(4);
  std::vector<double> freq(4, 0.0);
  for (int k = 0; k < 100000; ++k) freq[bf::sample_categorical(w, rng)] += 1.0;
  for (double f : freq) EXPECT_NEAR(f / 100000.0, 0.25, 0.01);
}

TEST(FeelGood, ScoresCapAtB) {
  const TableModel m({{3.0, 1.0}, {0.4, 0.1}});
  bf::Matrix history(1, 1, 0.0);
  const auto s = bf::fg_scores(m, history, 1.0, bf::ExecutionPolicy::Serial);
  EXPECT_EQ(s, (std::vector<double>{1.0, 0.4}));
}

TEST(FeelGood, IncrementalScoresMatchRecompute) {
  auto c = small_bfts(2, 5, 3);
  c.fg = bf::FgConfig{1.0, 0.5, 1.0};
  bf::BftsAgent agent(c);
  const auto stream = friedman_stream(40, 1);
  for (long t = 0; t < 40; ++t) {
    const auto x = stream.contexts.row(t);
    const int a = agent.select(x);
    agent.update(x, a, stream.rewards(t, a) / 30.0);
    if (agent.has_pools()) {
      const auto fresh = bf::fg_scores(agent, agent.history(), 1.0, bf::ExecutionPolicy::Serial);
      ASSERT_EQ(fresh.size(), agent.scores().size());
      for (std::size_t j = 0; j < fresh.size(); ++j) ASSERT_NEAR(agent.scores()[j], fresh[j], 1e-9);
    }
  }
}

TEST(Bfts, RoundRobinThenPosterior) {
  bf::BftsAgent agent(small_bfts(3, 5, 1));
  const auto stream = friedman_stream(30, 2);
  std::vector<double> x(stream.contexts.row(0).begin(), stream.contexts.row(0).end());
  for (long t = 1; t <= 6; ++t) {
    EXPECT_EQ(agent.select(x), int((t - 1) % 3));
    agent.update(x, int((t - 1) % 3), 1.0 * t);
    EXPECT_EQ(agent.has_pools(), t == 6);
  }
  EXPECT_EQ(agent.refresh_rounds(), std::vector<long>{6});
  EXPECT_EQ(agent.num_draws(), 12u);
}

TEST(Bfts, QueueUsesEachDrawOnceBetweenRefreshes) {
  auto c = small_bfts(2, 5, 4);
  c.refresh = bf::RefreshSchedule::every_n(1000);
  bf::BftsAgent agent(c);
  const auto stream = friedman_stream(4 + 36, 3);
  for (long t = 0; t < 4; ++t) agent.update(stream.contexts.row(t), int(t % 2), stream.rewards(t, t % 2));
  ASSERT_TRUE(agent.has_pools());
  const std::size_t N = agent.num_draws();
  std::vector<std::set<long>> windows(3);
  for (std::size_t k = 0; k < 3 * N; ++k) {
    const auto x = stream.contexts.row(4 + k % 36);
    const auto pools_before = agent.pools().front().draws.front().forest;
    const int a = agent.select(x);
    windows[k / N].insert(agent.last_draw());
    agent.update(x, a, stream.rewards(4 + k % 36, a));
    ASSERT_EQ(agent.pools().front().draws.front().forest, pools_before);
  }
  for (const auto& w : windows) EXPECT_EQ(w.size(), N);
}

TEST(Bfts, DatasetsPartitionRounds) {
  bf::BftsAgent agent(small_bfts(2, 5, 5));
  const auto stream = friedman_stream(25, 5);
  const auto actions = play(agent, stream, 25);
  EXPECT_EQ(agent.dataset_size(0) + agent.dataset_size(1), 25u);
  std::size_t zeros = 0;
  for (int a : actions) zeros += a == 0;
  EXPECT_EQ(agent.dataset_size(0), zeros);
}

TEST(Bfts, PolicyDistributionSumsToOne) {
  bf::BftsAgent agent(small_bfts(2, 5, 6));
  const auto stream = friedman_stream(20, 6);
  play(agent, stream, 20);
  const auto p = agent.policy_distribution(stream.contexts.row(0));
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
}

TEST(Bfts, SharedEncodingsRun) {
  for (auto enc : {bf::Encoding::OneHot, bf::Encoding::Multi}) {
    auto c = small_bfts(2, 5, 7);
    c.encoding = enc;
    bf::BftsAgent agent(c);
    const auto stream = friedman_stream(15, 7);
    play(agent, stream, 15);
    EXPECT_TRUE(agent.has_pools());
    EXPECT_EQ(agent.pools().size(), 1u);
  }
}

TEST(Bfts, FeelGoodLambdaZeroReplicatesPinnedSigmaBfts) {
  const double eta = 2.0;
  auto base = small_bfts(2, 5, 9);
  base.sampler.fixed_sigma2 = 1.0 / (2.0 * eta);
  auto fg = base;
  fg.fg = bf::FgConfig{eta, 0.0, 1.0};
  bf::BftsAgent a(base), b(fg);
  const auto stream = friedman_stream(60, 9);
  EXPECT_EQ(play(a, stream, 60), play(b, stream, 60));
}

TEST(Linear, RidgePosteriorMean) {
  bf::RidgeModel m(1, 1.0);
  m.add(std::vector<double>{1.0}, 1.0);
  EXPECT_DOUBLE_EQ(m.mean()[0], 0.5);
  EXPECT_DOUBLE_EQ(m.variance_score(std::vector<double>{1.0}), 0.5);
}

TEST(Linear, RidgeSampleCovariance) {
  bf::RidgeModel m(2, 1.0);
  m.add(std::vector<double>{1.0, 0.0}, 2.0);
  m.add(std::vector<double>{1.0, 1.0}, 1.0);
  bf::Rng rng(3);
  const Eigen::MatrixXd cov = m.precision().inverse();
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd w = m.sample(0.5, rng) - m.mean();
    mean += w;
    second += w * w.transpose();
  }
  mean /= n;
  second /= n;
  EXPECT_LT(mean.norm(), 0.01);
  EXPECT_LT((second - 0.25 * cov).cwiseAbs().maxCoeff(), 0.01);
}

TEST(Linear, NoDataZeroScaleTiesToArmZero) {
  bf::LinearConfig c;
  c.num_arms = 3;
  c.num_features = 2;
  c.nu = 0.0;
  bf::LinTsAgent ts(c);
  EXPECT_EQ(ts.select(std::vector<double>{0.4, 0.2}), 0);
  c.alpha = 0.0;
  bf::LinUcbAgent ucb(c);
  EXPECT_EQ(ucb.select(std::vector<double>{0.4, 0.2}), 0);
}

TEST(Linear, UcbPrefersUnexploredArm) {
  bf::LinearConfig c;
  c.num_arms = 2;
  c.num_features = 1;
  c.encoding = bf::Encoding::Separate;
  bf::LinUcbAgent ucb(c);
  const std::vector<double> x = {1.0};
  for (int k = 0; k < 10; ++k) ucb.update(x, 0, 0.1);
  EXPECT_EQ(ucb.select(x), 1);
  const auto p = ucb.policy_distribution(x);
  EXPECT_EQ(p, (std::vector<double>{0.0, 1.0}));
}

TEST(Linear, PolicyDistributionDoesNotPerturbSelection) {
  bf::LinearConfig c;
  c.num_arms = 2;
  c.num_features = 2;
  c.seed = 3;
  bf::LinTsAgent a(c), b(c);
  const std::vector<double> x = {0.2, 0.9};
  b.policy_distribution(x);
  for (int k = 0; k < 20; ++k) EXPECT_EQ(a.select(x), b.select(x));
}
