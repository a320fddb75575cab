#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bandit_forest/forest.hpp"
#include "bandit_forest/matrix.hpp"
#include "bandit_forest/rng.hpp"

namespace bandit_forest {

double friedman1(std::span<const double> x);
double friedman2(std::span<const double> x);
double friedman3(std::span<const double> x);

enum class SyntheticKind { Linear, Friedman1, Friedman2, Friedman3, SynBart };
enum class ArmVariant { Shared, Disjoint };

struct ScenarioSpec {
  std::string name;
  SyntheticKind kind = SyntheticKind::Friedman1;
  ArmVariant variant = ArmVariant::Shared;
  int num_features = 5;
  int num_arms = 2;
  bool heteroscedastic = false;
  double noise_sd = 1.0;
  int linear_active = 0;  // Linear only: coefficients beyond this index are 0; 0 means all
};

// Known scenario names: linear, friedman, friedman2, friedman3, friedman_sparse,
// friedman_sparse_disjoint, friedman_heteroscedastic, synbart.
ScenarioSpec scenario_by_name(const std::string& name);
std::vector<std::string> scenario_names();

// Full per-replication interaction stream shared by every agent.
struct InteractionStream {
  Matrix contexts;          // T x P
  Matrix means;             // T x K exact mean reward of each arm
  Matrix rewards;           // T x K realized reward of each arm
  std::vector<int> labels;  // classification streams only
};

class BanditEnvironment {
 public:
  virtual ~BanditEnvironment() = default;
  virtual std::string name() const = 0;
  virtual int num_arms() const = 0;
  virtual int num_features() const = 0;
  virtual InteractionStream materialize(long horizon, Rng& rng) const = 0;
  // Exact mean reward vector; only environments with known truth support it.
  virtual bool has_truth() const { return false; }
  virtual std::vector<double> arm_means(std::span<const double> x) const;
};

class SyntheticEnv : public BanditEnvironment {
 public:
  // Draws the per-replication parameters (coefficients, noise scales, prior forests).
  SyntheticEnv(ScenarioSpec spec, Rng& rng);

  std::string name() const override { return spec_.name; }
  int num_arms() const override { return spec_.num_arms; }
  int num_features() const override { return spec_.num_features; }
  bool has_truth() const override { return true; }
  std::vector<double> arm_means(std::span<const double> x) const override;
  InteractionStream materialize(long horizon, Rng& rng) const override;

  double noise_sd(int arm) const { return noise_sd_[arm]; }
  const ScenarioSpec& spec() const { return spec_; }
  const std::vector<std::vector<double>>& coefficients() const { return beta_; }

 private:
  double base_function(std::span<const double> x) const;

  ScenarioSpec spec_;
  std::vector<double> noise_sd_;
  std::vector<std::vector<double>> beta_;
  std::vector<CompactForest> arm_forests_;
};

// Prior settings used for SynBART reward functions.
PriorConfig synbart_prior();

// SynBART environment: each arm's mean is a frozen prior forest draw over a
// grid built from 10,000 uniform points.
SyntheticEnv synbart_env_init(int num_features, int num_arms, Rng& rng);

struct TabularOptions {
  std::vector<std::string> categorical;  // forced categorical columns
};

struct TabularData {
  Matrix features;  // scaled to [0, 1], categoricals one-hot
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  int num_classes() const { return static_cast<int>(class_names.size()); }
};

// Numeric columns are min-max scaled (constant columns become 0); a column is
// categorical if listed in options or if its first value is not numeric.
// Labels are factorized to 0..K-1 in order of first appearance.
TabularData load_tabular_csv(const std::string& path, const std::string& label_column,
                             const TabularOptions& options = {});

class EnvironmentExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ClassificationBanditEnv : public BanditEnvironment {
 public:
  ClassificationBanditEnv(TabularData data, std::string name);

  std::string name() const override { return name_; }
  int num_arms() const override { return data_.num_classes(); }
  int num_features() const override { return static_cast<int>(data_.features.cols()); }
  // Shuffles the rows with rng; throws EnvironmentExhausted if horizon > rows.
  InteractionStream materialize(long horizon, Rng& rng) const override;
  const TabularData& data() const { return data_; }

 private:
  TabularData data_;
  std::string name_;
};

struct StepOutcome {
  double reward = 0.0;
  double regret = 0.0;
};

// Reward 1 for the correct class; round t is 1-based.
StepOutcome classification_step(const InteractionStream& stream, long t, int action);

struct LoggedPanel {
  Matrix contexts;
  std::vector<int> actions;
  std::vector<double> rewards;
  Matrix propensities;  // n x K behavior probabilities
  std::vector<int> clusters;
  std::vector<long> steps;
  std::vector<std::string> cluster_names;

  std::size_t size() const { return actions.size(); }
  int num_arms() const { return static_cast<int>(propensities.cols()); }
  int num_clusters() const { return static_cast<int>(cluster_names.size()); }
  LoggedPanel subset(std::span<const std::size_t> rows) const;
};

// Columns: context_0..context_{p-1}, action, reward, prop_0..prop_{K-1}, cluster_id, step.
LoggedPanel load_panel_csv(const std::string& path);
void write_panel_csv(const std::string& path, const LoggedPanel& panel);

struct SyntheticPanelSpec {
  std::size_t rows = 2000;
  int num_features = 5;
  std::vector<double> behavior = {0.4, 0.3, 0.3};
  double noise_sd = 0.5;
  int min_cluster = 5;
  int max_cluster = 40;
};

// Logged panel with linear arm means; `truth` receives the mean-reward coefficients
// as rows (intercept first) so tests can evaluate exact policy values.
LoggedPanel generate_synthetic_panel(const SyntheticPanelSpec& spec, Rng& rng, Matrix* truth);

double synthetic_panel_mean(const Matrix& truth, int arm, std::span<const double> x);

}  // namespace bandit_forest
