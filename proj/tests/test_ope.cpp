#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "bandit_forest/ope.hpp"
#include "oracles.hpp"

namespace bf = bandit_forest;

namespace {

bf::LoggedPanel make_panel(std::size_t rows, std::uint64_t seed, bf::Matrix* truth = nullptr) {
  bf::SyntheticPanelSpec spec;
  spec.rows = rows;
  bf::Rng rng(seed);
  return bf::generate_synthetic_panel(spec, rng, truth);
}

// Always plays one arm.
class ConstantAgent : public bf::Agent {
 public:
  ConstantAgent(int k, int arm) : k_(k), arm_(arm) {}
  std::string name() const override { return "constant"; }
  int num_arms() const override { return k_; }
  int select(std::span<const double>) override { return arm_; }
  void update(std::span<const double>, int, double) override { ++updates; }
  std::vector<double> policy_distribution(std::span<const double>) override {
    std::vector<double> p(k_, 0.0);
    p[arm_] = 1.0;
    return p;
  }
  int updates = 0;

 private:
  int k_, arm_;
};

}  // namespace

TEST(Snips, Examples) {
  const std::vector<double> w = {1, 2}, r = {0, 1};
  EXPECT_DOUBLE_EQ(bf::snips(w, r), 2.0 / 3.0);
  const std::vector<double> ones(4, 1.0), rs = {1, 2, 3, 6};
  EXPECT_DOUBLE_EQ(bf::snips(ones, rs), 3.0);
  EXPECT_DOUBLE_EQ(bf::snips(std::vector<double>{0.7}, std::vector<double>{-2.5}), -2.5);
  const std::vector<double> w3 = {0.5, 1.5, 3.0}, w3x = {5.0, 15.0, 30.0}, r3 = {1, -1, 4};
  EXPECT_NEAR(bf::snips(w3, r3), bf::snips(w3x, r3), 1e-15);
  EXPECT_THROW(bf::snips(std::vector<double>{0.0}, std::vector<double>{1.0}), std::domain_error);
}

TEST(Ess, Examples) {
  EXPECT_DOUBLE_EQ(bf::ess(std::vector<double>{1, 2}), 1.8);
  EXPECT_DOUBLE_EQ(bf::ess(std::vector<double>(7, 0.3)), 7.0);
  EXPECT_DOUBLE_EQ(bf::ess(std::vector<double>{0, 0, 5, 0}), 1.0);
}

TEST(Replay, UniformAgentMatchesAThird) {
  const auto panel = make_panel(10000, 1);
  bf::UniformAgent agent(3, 7);
  const auto result = bf::replay_run(agent, panel);
  EXPECT_NEAR(result.match_rate(), 1.0 / 3.0, 0.02);
  EXPECT_EQ(result.records.size(), panel.size());
  std::size_t matched = 0;
  for (const auto& r : result.records) matched += r.matched;
  EXPECT_EQ(result.updates, matched);
}

TEST(Replay, DeterministicAgentMatchesLoggedConstant) {
  auto panel = make_panel(50, 2);
  for (auto& a : panel.actions) a = 1;
  ConstantAgent agent(3, 1);
  const auto result = bf::replay_run(agent, panel);
  EXPECT_EQ(result.match_rate(), 1.0);
  EXPECT_EQ(agent.updates, 50);
  for (const auto& r : result.records) EXPECT_DOUBLE_EQ(r.weight, 1.0 / 0.3);
}

TEST(Replay, PositivityAndArmChecks) {
  auto panel = make_panel(20, 3);
  panel.propensities(5, panel.actions[5]) = 0.0;
  bf::UniformAgent agent(3, 1);
  EXPECT_THROW(bf::replay_run(agent, panel), std::runtime_error);
  bf::UniformAgent two(2, 1);
  EXPECT_THROW(bf::replay_run(two, make_panel(20, 3)), std::invalid_argument);
}

TEST(Replay, SameSeedSameRecords) {
  const auto panel = make_panel(300, 4);
  bf::UniformAgent a(3, 11), b(3, 11);
  const auto ra = bf::replay_run(a, panel), rb = bf::replay_run(b, panel);
  for (std::size_t i = 0; i < panel.size(); ++i) EXPECT_EQ(ra.records[i].sampled_action, rb.records[i].sampled_action);
}

TEST(Replay, WeightsBoundedByInversePropensity) {
  const auto panel = make_panel(2000, 5);
  bf::FixedPolicyAgent agent({0.1, 0.2, 0.7}, 3);
  const auto result = bf::replay_run(agent, panel);
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const double w = result.records[i].weight;
    EXPECT_GE(w, 0.0);
    EXPECT_LE(w, 1.0 / panel.propensities(i, panel.actions[i]) + 1e-12);
  }
}

TEST(PolicyDist, MatchesVoteFractions) {
  class Votes : public bf::ArmPredictor {
   public:
    std::size_t num_draws() const override { return 4; }
    int num_arms() const override { return 3; }
    double predict(std::size_t d, int a, std::span<const double>) const override {
      static const double v[4][3] = {{0, 1, 0}, {0, 1, 0}, {2, 0, 0}, {1, 1, 1}};
      return v[d][a];
    }
  } model;
  const auto p = bf::estimate_policy_dist(model, std::vector<double>{0.5});
  EXPECT_EQ(p, (std::vector<double>{0.5, 0.5, 0.0}));
}

TEST(Dr, UnbiasedForBehaviorPolicy) {
  const auto check = oracles::dr_oracle(10000, 21);
  EXPECT_LT(std::abs(check.dr - check.truth), 3.0 * check.se);
  EXPECT_NEAR(check.dr, check.dr_formula, 1e-10);
}

TEST(Dr, UnbiasedForDeterministicTarget) {
  bf::Matrix coef;
  const auto panel = make_panel(10000, 22, &coef);
  bf::Matrix target(panel.size(), 3, 0.0);
  for (std::size_t i = 0; i < panel.size(); ++i) target(i, 2) = 1.0;
  double truth = coef(2, 0);
  for (std::size_t j = 1; j < coef.cols(); ++j) truth += 0.5 * coef(2, j);
  const bf::Matrix q = bf::cross_fit_outcomes(panel);
  std::vector<double> terms(panel.size());
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const double w = panel.actions[i] == 2 ? 1.0 / 0.3 : 0.0;
    terms[i] = q(i, 2) + w * (panel.rewards[i] - q(i, panel.actions[i]));
  }
  const double mean = std::accumulate(terms.begin(), terms.end(), 0.0) / terms.size();
  double ss = 0;
  for (double t : terms) ss += (t - mean) * (t - mean);
  const double se = std::sqrt(ss / (terms.size() - 1) / terms.size());
  const double dr = bf::dr_estimate(panel, target);
  EXPECT_NEAR(dr, mean, 1e-10);
  EXPECT_LT(std::abs(dr - truth), 3.0 * se);
}

TEST(Dr, ZeroOutcomeModelIsIps) {
  const auto panel = make_panel(400, 23);
  bf::Matrix target(panel.size(), 3, 1.0 / 3.0);
  const bf::Matrix zero(panel.size(), 3, 0.0);
  double ips = 0.0;
  for (std::size_t i = 0; i < panel.size(); ++i)
    ips += (1.0 / 3.0) / panel.propensities(i, panel.actions[i]) * panel.rewards[i];
  EXPECT_NEAR(bf::dr_value(panel, target, zero), ips / panel.size(), 1e-12);
}

TEST(Dr, ExactOutcomeModelHasNoCorrection) {
  auto panel = make_panel(300, 24);
  bf::Matrix q(panel.size(), 3);
  for (std::size_t i = 0; i < panel.size(); ++i) {
    for (int a = 0; a < 3; ++a) q(i, a) = 0.1 * a + panel.contexts(i, 0);
    panel.rewards[i] = q(i, panel.actions[i]);
  }
  bf::Matrix target(panel.size(), 3, 0.0);
  double plug_in = 0.0;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    target(i, 0) = 0.2;
    target(i, 2) = 0.8;
    plug_in += 0.2 * q(i, 0) + 0.8 * q(i, 2);
  }
  EXPECT_NEAR(bf::dr_value(panel, target, q), plug_in / panel.size(), 1e-12);
}

TEST(Bootstrap, ResampledSizeAndDeterminism) {
  const auto panel = make_panel(3000, 25);
  const auto size = [](const bf::LoggedPanel& p, std::size_t) { return double(p.size()); };
  const auto sizes = bf::cluster_bootstrap(panel, 200, size, 9, bf::ExecutionPolicy::Serial);
  const double mean = std::accumulate(sizes.begin(), sizes.end(), 0.0) / sizes.size();
  EXPECT_NEAR(mean, double(panel.size()), 0.05 * panel.size());
  EXPECT_EQ(sizes, bf::cluster_bootstrap(panel, 200, size, 9, bf::ExecutionPolicy::Parallel));
}

TEST(Bootstrap, ClustersStayWhole) {
  const auto panel = make_panel(500, 26);
  const auto check = [](const bf::LoggedPanel& p, std::size_t) {
    // Each resampled copy starts at step 0 and runs through its cluster in order.
    if (p.steps[0] != 0) return 0.0;
    for (std::size_t i = 1; i < p.size(); ++i) {
      const bool continues = p.clusters[i] == p.clusters[i - 1] && p.steps[i] == p.steps[i - 1] + 1;
      if (!continues && p.steps[i] != 0) return 0.0;
    }
    return 1.0;
  };
  for (double ok : bf::cluster_bootstrap(panel, 20, check, 3, bf::ExecutionPolicy::Serial)) EXPECT_EQ(ok, 1.0);
}

TEST(Bootstrap, NeedsTwoClusters) {
  auto panel = make_panel(30, 27);
  for (auto& c : panel.clusters) c = 0;
  panel.cluster_names.resize(1);
  const auto stat = [](const bf::LoggedPanel&, std::size_t) { return 0.0; };
  EXPECT_THROW(bf::cluster_bootstrap(panel, 5, stat, 1), std::invalid_argument);
}

TEST(RunOpe, CheckpointsAndReplicates) {
  const auto panel = make_panel(1500, 28);
  bf::OpeRunConfig config;
  config.estimators = {bf::OpeEstimator::Snips, bf::OpeEstimator::Dr};
  config.checkpoints = {1000, 2000};
  config.bootstrap = 3;
  const bf::AgentFactory factory = [](std::uint64_t seed) {
    return std::make_unique<bf::FixedPolicyAgent>(std::vector<double>{0.4, 0.3, 0.3}, seed);
  };
  const auto rows = bf::run_ope(panel, factory, config, bf::ExecutionPolicy::Serial);
  // 2 checkpoints (1000 and the full 1500) x 2 estimators x (1 + 3 panels).
  ASSERT_EQ(rows.size(), 16u);
  EXPECT_EQ(rows[0].checkpoint, 1000);
  EXPECT_EQ(rows[2].checkpoint, 1500);
  EXPECT_EQ(rows[0].replicate, -1);
  EXPECT_EQ(rows.back().replicate, 2);
  // Behavior policy as target: all weights 1, so SNIPS is the reward mean.
  double mean = 0;
  for (std::size_t i = 0; i < 1000; ++i) mean += panel.rewards[i];
  EXPECT_NEAR(rows[0].value, mean / 1000, 1e-12);
  EXPECT_NEAR(rows[0].ess, 1000.0, 1e-9);
  const auto again = bf::run_ope(panel, factory, config, bf::ExecutionPolicy::Parallel);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].value, again[i].value);
}

TEST(RunOpe, EstimatorNames) {
  EXPECT_EQ(bf::parse_estimator("snips"), bf::OpeEstimator::Snips);
  EXPECT_EQ(bf::parse_estimator("dr"), bf::OpeEstimator::Dr);
  EXPECT_ANY_THROW(bf::parse_estimator("ips"));
}
