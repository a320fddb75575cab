#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "bandit_forest/environments.hpp"
#include "bandit_forest/forest.hpp"

namespace bf = bandit_forest;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "bandit_forest_env_tests";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST(Friedman, OneExamples) {
  EXPECT_DOUBLE_EQ(bf::friedman1(std::vector<double>(5, 0.0)), 5.0);
  EXPECT_NEAR(bf::friedman1(std::vector<double>(5, 0.5)), 14.571067811865476, 1e-12);
  std::vector<double> x = {0.2, 0.4, 0.6, 0.3, 0.9, 0.1};
  const double base = bf::friedman1(x);
  x[3] += 1e-3;
  EXPECT_NEAR((bf::friedman1(x) - base) / 1e-3, 10.0, 1e-9);
}

TEST(Friedman, TwoAndThree) {
  EXPECT_NEAR(bf::friedman2(std::vector<double>(4, 0.0)), 1.0 / (125.0 * 40.0 * std::numbers::pi), 1e-15);
  // x1 = 0 with a positive numerator: arctan limit pi / 2.
  EXPECT_NEAR(bf::friedman3(std::vector<double>{0.0, 0.5, 0.9, 0.5}), 15.707963267948966, 1e-12);
  EXPECT_NEAR(bf::friedman3(std::vector<double>{0.0, 0.0, 0.0, 0.0}), -15.707963267948966, 1e-12);
  bf::Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> x(4);
    for (double& v : x) v = bf::uniform01(rng);
    EXPECT_GE(bf::friedman2(x), 0.0);
    EXPECT_TRUE(std::isfinite(bf::friedman3(x)));
  }
}

TEST(Scenarios, AllNamesConstruct) {
  for (const auto& name : bf::scenario_names()) {
    bf::Rng rng(3);
    bf::SyntheticEnv env(bf::scenario_by_name(name), rng);
    const auto s = env.materialize(20, rng);
    EXPECT_EQ(s.contexts.rows(), 20u);
    EXPECT_EQ(s.means.cols(), std::size_t(env.num_arms()));
  }
  EXPECT_THROW(bf::scenario_by_name("nope"), std::invalid_argument);
}

TEST(Scenarios, DisjointPalindromeAndSharedZero) {
  bf::Rng rng(1);
  bf::SyntheticEnv disjoint(bf::scenario_by_name("friedman_sparse_disjoint"), rng);
  std::vector<double> pal(20);
  for (int v = 0; v < 10; ++v) pal[v] = pal[19 - v] = 0.05 * (v + 1);
  const auto m = disjoint.arm_means(pal);
  EXPECT_EQ(m[0], m[1]);

  bf::SyntheticEnv shared(bf::scenario_by_name("friedman"), rng);
  const auto s = shared.arm_means(std::vector<double>{0.0, 0.7, 0.2, 0.3, 0.4});
  EXPECT_EQ(s[0], s[1]);
}

TEST(Scenarios, LinearMeansAreDotProducts) {
  bf::Rng rng(2);
  bf::SyntheticEnv env(bf::scenario_by_name("linear"), rng);
  std::vector<double> e1(10, 0.0);
  e1[0] = 0.3;
  const auto mu = env.arm_means(e1);
  for (int a = 0; a < 3; ++a) EXPECT_DOUBLE_EQ(mu[a], 0.3 * env.coefficients()[a][0]);
}

TEST(Scenarios, RegretIsNonNegative) {
  for (const std::string name : {"linear", "friedman", "friedman_sparse_disjoint", "synbart"}) {
    bf::Rng rng(4);
    bf::SyntheticEnv env(bf::scenario_by_name(name), rng);
    const auto s = env.materialize(200, rng);
    for (long t = 0; t < 200; ++t) {
      double best = -1e300;
      for (std::size_t a = 0; a < s.means.cols(); ++a) best = std::max(best, s.means(t, a));
      for (std::size_t a = 0; a < s.means.cols(); ++a) {
        const double regret = best - s.means(t, a);
        EXPECT_GE(regret, 0.0);
        EXPECT_EQ(regret == 0.0, s.means(t, a) == best);
        EXPECT_EQ(s.means(t, a), env.arm_means(s.contexts.row(t))[a]);
      }
      for (std::size_t v = 0; v < s.contexts.cols(); ++v) {
        EXPECT_GE(s.contexts(t, v), 0.0);
        EXPECT_LT(s.contexts(t, v), 1.0);
      }
    }
  }
}

TEST(Scenarios, HeteroscedasticVariancesInRange) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    bf::Rng rng(seed);
    bf::SyntheticEnv env(bf::scenario_by_name("friedman_heteroscedastic"), rng);
    for (int a = 0; a < 2; ++a) {
      const double var = env.noise_sd(a) * env.noise_sd(a);
      EXPECT_GE(var, 0.1 - 1e-12);
      EXPECT_LE(var, 10.0 + 1e-12);
    }
  }
}

TEST(Scenarios, SameSeedSameStream) {
  bf::Rng a(9), b(9);
  bf::SyntheticEnv ea(bf::scenario_by_name("friedman"), a), eb(bf::scenario_by_name("friedman"), b);
  const auto sa = ea.materialize(50, a), sb = eb.materialize(50, b);
  EXPECT_EQ(sa.contexts.data(), sb.contexts.data());
  EXPECT_EQ(sa.rewards.data(), sb.rewards.data());
}

TEST(SynBart, DeterministicAndPiecewiseConstant) {
  bf::Rng a(5), b(5);
  const auto ea = bf::synbart_env_init(4, 3, a);
  const auto eb = bf::synbart_env_init(4, 3, b);
  const std::vector<double> x = {0.1, 0.5, 0.9, 0.33};
  EXPECT_EQ(ea.arm_means(x), eb.arm_means(x));
  // A tiny move that crosses no threshold leaves the means unchanged.
  std::vector<double> y = x;
  y[0] += 1e-12;
  EXPECT_EQ(ea.arm_means(x), ea.arm_means(y));
}

TEST(SynBart, MarginalSdHasPriorScale) {
  // Sum of m = 100 trees with leaf sd 0.5 / (2 * 10): sd of order sqrt(m) * sigma_mu = 0.25.
  for (std::uint64_t seed : {1, 2, 3}) {
    bf::Rng rng(seed);
    const auto env = bf::synbart_env_init(4, 1, rng);
    double s = 0, ss = 0;
    const int n = 4000;
    for (int k = 0; k < n; ++k) {
      std::vector<double> x(4);
      for (double& v : x) v = bf::uniform01(rng);
      const double mu = env.arm_means(x)[0];
      s += mu;
      ss += mu * mu;
    }
    const double sd = std::sqrt(ss / n - (s / n) * (s / n));
    EXPECT_GT(sd, 0.25 / 3.0);
    EXPECT_LT(sd, 0.25 * 3.0);
  }
}

TEST(Tabular, ScalingOneHotAndLabels) {
  const auto path = write_temp("toy.csv",
                               "size,color,flat,label\n"
                               "0,red,3,yes\n"
                               "10,green,3,no\n"
                               "5,blue,3,yes\n");
  const auto data = bf::load_tabular_csv(path, "label");
  ASSERT_EQ(data.features.rows(), 3u);
  ASSERT_EQ(data.features.cols(), 5u);  // size, 3 colors, flat
  EXPECT_EQ(data.features(0, 0), 0.0);
  EXPECT_EQ(data.features(1, 0), 1.0);
  EXPECT_EQ(data.features(2, 0), 0.5);
  double one_hot = 0;
  for (std::size_t c = 1; c <= 3; ++c) one_hot += data.features(2, c);
  EXPECT_EQ(one_hot, 1.0);
  EXPECT_EQ(data.features(1, 4), 0.0);  // constant column
  EXPECT_EQ(data.labels, (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(data.class_names, (std::vector<std::string>{"yes", "no"}));
}

TEST(Tabular, Errors) {
  EXPECT_THROW(bf::load_tabular_csv(write_temp("one.csv", "a,label\n1,x\n2,x\n"), "label"), std::runtime_error);
  try {
    bf::load_tabular_csv(write_temp("bad.csv", "a,label\n1,x\nfoo,y\n"), "label");
    FAIL() << "expected a parse error";
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row"), std::string::npos);
    EXPECT_NE(msg.find("a"), std::string::npos);
  }
  EXPECT_ANY_THROW(bf::load_tabular_csv(write_temp("nolabel.csv", "a,b\n1,2\n"), "label"));
}

TEST(Classification, RewardsAndExhaustion) {
  const auto path = write_temp("cls.csv", "f,label\n0,a\n1,b\n2,a\n3,c\n");
  bf::ClassificationBanditEnv env(bf::load_tabular_csv(path, "label"), "cls");
  EXPECT_EQ(env.num_arms(), 3);
  bf::Rng rng(1);
  const auto s = env.materialize(4, rng);
  double regret = 0;
  int wrong = 0;
  for (long t = 1; t <= 4; ++t) {
    const int label = s.labels[t - 1];
    const auto hit = bf::classification_step(s, t, label);
    EXPECT_EQ(hit.reward, 1.0);
    EXPECT_EQ(hit.regret, 0.0);
    const auto miss = bf::classification_step(s, t, (label + 1) % 3);
    EXPECT_EQ(miss.reward, 0.0);
    regret += miss.regret;
    ++wrong;
    EXPECT_EQ(s.rewards(t - 1, label), 1.0);
  }
  EXPECT_EQ(regret, wrong);
  EXPECT_THROW(bf::classification_step(s, 5, 0), bf::EnvironmentExhausted);
  bf::Rng again(1);
  EXPECT_THROW(env.materialize(5, again), bf::EnvironmentExhausted);
}

TEST(Panel, CsvRoundTripAndValidation) {
  bf::SyntheticPanelSpec spec;
  spec.rows = 120;
  bf::Rng rng(3);
  const auto panel = bf::generate_synthetic_panel(spec, rng, nullptr);
  const fs::path dir = fs::temp_directory_path() / "bandit_forest_env_tests";
  fs::create_directories(dir);
  const std::string path = (dir / "panel.csv").string();
  bf::write_panel_csv(path, panel);
  const auto back = bf::load_panel_csv(path);
  EXPECT_EQ(back.actions, panel.actions);
  EXPECT_EQ(back.rewards, panel.rewards);
  EXPECT_EQ(back.contexts.data(), panel.contexts.data());
  EXPECT_EQ(back.clusters, panel.clusters);
  EXPECT_EQ(back.steps, panel.steps);

  const auto bad = write_temp("badprop.csv",
                              "context_0,action,reward,prop_0,prop_1,cluster_id,step\n"
                              "0.5,0,1,0.5,0.6,u1,0\n");
  EXPECT_ANY_THROW(bf::load_panel_csv(bad));
  const auto range = write_temp("badaction.csv",
                                "context_0,action,reward,prop_0,prop_1,cluster_id,step\n"
                                "0.5,2,1,0.5,0.5,u1,0\n");
  EXPECT_ANY_THROW(bf::load_panel_csv(range));
}

TEST(Panel, ClustersAreContiguousAndOrdered) {
  bf::SyntheticPanelSpec spec;
  spec.rows = 500;
  bf::Rng rng(4);
  const auto panel = bf::generate_synthetic_panel(spec, rng, nullptr);
  for (std::size_t i = 1; i < panel.size(); ++i) {
    if (panel.clusters[i] == panel.clusters[i - 1]) {
      EXPECT_EQ(panel.steps[i], panel.steps[i - 1] + 1);
    } else {
      EXPECT_EQ(panel.steps[i], 0);
    }
  }
}
