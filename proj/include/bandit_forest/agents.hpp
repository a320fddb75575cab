#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bandit_forest/kernels.hpp"
#include "bandit_forest/matrix.hpp"
#include "bandit_forest/mcmc.hpp"
#include "bandit_forest/rng.hpp"

namespace bandit_forest {

enum class RefreshKind { Logarithmic, SquareRoot, EveryN };

struct RefreshSchedule {
  RefreshKind kind = RefreshKind::Logarithmic;
  double c = 8.0;  // Logarithmic / SquareRoot scale, or the period for EveryN

  static RefreshSchedule logarithmic(double c) { return {RefreshKind::Logarithmic, c}; }
  static RefreshSchedule square_root(double c) { return {RefreshKind::SquareRoot, c}; }
  static RefreshSchedule every_n(long n) { return {RefreshKind::EveryN, double(n)}; }
};

// r(t): ceil(c ln t), ceil(c sqrt t) or floor(t / n).  r(0) is 0.
long refresh_index(long t, const RefreshSchedule& schedule);

// Refresh condition at round t: t == tau_k, or t > tau_k and r(t) > r(t - 1).
// Rounds before tau_k never refresh because round-robin ignores the pool.
bool refresh_fires(long t, long tau_k, const RefreshSchedule& schedule);

// Rounds in [1, horizon] where r(t) > r(t - 1), independent of tau_k.
std::vector<long> refresh_increase_rounds(const RefreshSchedule& schedule, long horizon);

enum class Encoding { Separate, OneHot, Multi };

std::size_t encoded_dim(std::size_t p, int num_arms, Encoding encoding);
// Separate returns x unchanged; OneHot gives (e_a, x); Multi puts x in block a.
std::vector<double> encode(std::span<const double> x, int arm, int num_arms, Encoding encoding);

// First index attaining the maximum.
int argmax_min_index(std::span<const double> values);

class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  virtual int num_arms() const = 0;
  virtual int select(std::span<const double> x) = 0;
  virtual void update(std::span<const double> x, int action, double reward) = 0;
  // Probability the agent would choose each arm at x in its current state.
  virtual std::vector<double> policy_distribution(std::span<const double> x) = 0;
};

class UniformAgent : public Agent {
 public:
  UniformAgent(int num_arms, std::uint64_t seed) : k_(num_arms), rng_(seed) {}
  std::string name() const override { return "uniform"; }
  int num_arms() const override { return k_; }
  int select(std::span<const double>) override;
  void update(std::span<const double>, int, double) override {}
  std::vector<double> policy_distribution(std::span<const double>) override;

 private:
  int k_;
  Rng rng_;
};

struct FgConfig {
  double eta = 1.0;
  double lambda = 0.01;
  double b = 1.0;
};

struct BftsConfig {
  int num_arms = 2;
  int num_features = 1;
  SamplerConfig sampler;
  RefreshSchedule refresh;
  int tau = 5;
  Encoding encoding = Encoding::Separate;
  std::optional<FgConfig> fg;
  std::uint64_t seed = 0;
  ExecutionPolicy policy = ExecutionPolicy::Parallel;
};

// Selection probabilities proportional to exp(lambda * S_j), max-shifted.
std::vector<double> fg_selection_probs(std::span<const double> scores, double lambda);

// Thompson sampling over per-arm BART draw pools with a batched refresh.  With
// an FgConfig it becomes the optimism-tilted variant: sigma^2 is pinned at
// 1 / (2 eta) and draws are resampled by exp(lambda * S_j).
class BftsAgent : public Agent, public ArmPredictor {
 public:
  explicit BftsAgent(BftsConfig config);

  std::string name() const override { return config_.fg ? "fg-bfts" : "bfts"; }
  int num_arms() const override { return config_.num_arms; }
  int select(std::span<const double> x) override;
  void update(std::span<const double> x, int action, double reward) override;
  std::vector<double> policy_distribution(std::span<const double> x) override;

  std::size_t num_draws() const override;
  double predict(std::size_t draw, int arm, std::span<const double> x) const override;

  // Round the next select() call belongs to.
  long next_round() const { return updates_ + 1; }
  bool has_pools() const { return !pools_.empty(); }
  bool refreshed_last_update() const { return refreshed_last_update_; }
  const std::vector<DrawPool>& pools() const { return pools_; }
  const std::vector<long>& refresh_rounds() const { return refresh_rounds_; }
  // Pooled draw index used by the latest posterior select(); -1 before any.
  long last_draw() const { return last_draw_; }
  const std::vector<double>& scores() const { return scores_; }
  const Matrix& history() const { return history_; }
  std::size_t dataset_size(int arm) const;
  const BftsConfig& config() const { return config_; }
  // Predictions of arm a's model for every draw at x.
  std::vector<double> arm_draws(int arm, std::span<const double> x) const;

 private:
  int model_count() const;
  void refresh(long t);
  std::size_t next_queue_index();
  int greedy_action(std::size_t draw, std::span<const double> x) const;

  BftsConfig config_;
  Rng rng_;
  long updates_ = 0;
  bool refreshed_last_update_ = false;
  std::vector<Matrix> X_;
  std::vector<std::vector<double>> y_;
  std::vector<DrawPool> pools_;
  std::vector<std::size_t> queue_;
  std::size_t cursor_ = 0;
  long last_draw_ = -1;
  std::vector<long> refresh_rounds_;
  Matrix history_;
  std::vector<double> scores_;
  std::vector<std::size_t> arm_counts_;
};

class RidgeModel {
 public:
  RidgeModel(std::size_t dim, double lambda);
  void add(std::span<const double> z, double r);
  Eigen::VectorXd mean() const;
  double mean_score(std::span<const double> z) const;
  double variance_score(std::span<const double> z) const;  // z' A^-1 z
  // Draw from N(mean, scale^2 A^-1).
  Eigen::VectorXd sample(double scale, Rng& rng) const;
  std::size_t dim() const { return static_cast<std::size_t>(b_.size()); }
  const Eigen::MatrixXd& precision() const { return A_; }

 private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
};

struct LinearConfig {
  int num_arms = 2;
  int num_features = 1;
  Encoding encoding = Encoding::Multi;
  double lambda_ridge = 1.0;
  double nu = 1.0;     // LinTS posterior scale
  double alpha = 1.0;  // LinUCB width
  int policy_samples = 256;
  std::uint64_t seed = 0;
};

class LinearAgentBase : public Agent {
 public:
  explicit LinearAgentBase(LinearConfig config);
  int num_arms() const override { return config_.num_arms; }
  void update(std::span<const double> x, int action, double reward) override;
  const RidgeModel& model_for(int arm) const;
  const LinearConfig& config() const { return config_; }

 protected:
  std::vector<double> features_for(std::span<const double> x, int arm) const;
  std::size_t model_index(int arm) const;

  LinearConfig config_;
  std::vector<RidgeModel> models_;
  long updates_ = 0;
};

class LinTsAgent : public LinearAgentBase {
 public:
  explicit LinTsAgent(LinearConfig config);
  std::string name() const override { return "lints"; }
  int select(std::span<const double> x) override;
  std::vector<double> policy_distribution(std::span<const double> x) override;

 private:
  int sampled_action(std::span<const double> x, Rng& rng) const;
  Rng rng_;
};

class LinUcbAgent : public LinearAgentBase {
 public:
  explicit LinUcbAgent(LinearConfig config) : LinearAgentBase(std::move(config)) {}
  std::string name() const override { return "linucb"; }
  int select(std::span<const double> x) override;
  std::vector<double> policy_distribution(std::span<const double> x) override;
  std::vector<double> ucb_scores(std::span<const double> x) const;
};

}  // namespace bandit_forest
