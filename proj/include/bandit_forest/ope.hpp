#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bandit_forest/agents.hpp"
#include "bandit_forest/environments.hpp"
#include "bandit_forest/kernels.hpp"
#include "bandit_forest/matrix.hpp"

namespace bandit_forest {

struct ReplayRecord {
  std::vector<double> policy;  // agent's distribution before seeing the row
  int logged_action = 0;
  int sampled_action = 0;
  double reward = 0.0;
  double weight = 0.0;  // pi_e(a | x) / pi_b(a | x) for the logged action
  bool matched = false;
};

struct ReplayResult {
  std::vector<ReplayRecord> records;
  std::size_t updates = 0;

  double match_rate() const;
  std::vector<double> weights(std::size_t prefix) const;
  std::vector<double> rewards(std::size_t prefix) const;
  Matrix policies(std::size_t prefix) const;  // prefix x K
};

// Streams the panel rows through the agent in order.  The agent samples an
// action at every row and is updated only when it matches the logged action.
ReplayResult replay_run(Agent& agent, const LoggedPanel& panel);

// Vote distribution of a K-arm posterior at x; ties go to the lower arm.
std::vector<double> estimate_policy_dist(const ArmPredictor& model, std::span<const double> x);

double snips(std::span<const double> weights, std::span<const double> rewards);
double ess(std::span<const double> weights);

struct DrOptions {
  double lambda_ridge = 1.0;
};

// Cross-fitted outcome predictions q(x_i, a), n x K.  Rows are split into two
// folds by parity; each fold is predicted by per-arm ridge fits (with
// intercept) on the other fold.  An arm missing from the other fold falls back
// to a fit on all of its rows; an arm never logged predicts 0.
Matrix cross_fit_outcomes(const LoggedPanel& panel, const DrOptions& options = {});

// V = mean_i [ sum_a pi_e(a | x_i) q(x_i, a) + w_i (r_i - q(x_i, a_i)) ] over
// the first rows() of `policy`.
double dr_value(const LoggedPanel& panel, const Matrix& policy, const Matrix& outcomes);

double dr_estimate(const LoggedPanel& panel, const Matrix& policy, const DrOptions& options = {});

// Rows of the panel for the given sequence of cluster indices, each cluster in
// its original order.
std::vector<std::size_t> cluster_rows(const LoggedPanel& panel, std::span<const int> clusters);

using PanelStatistic = std::function<double(const LoggedPanel&, std::size_t replicate)>;

// B replicates resampling whole clusters with replacement.  Replicate b uses
// the stream derive_seed(seed, {b}).
std::vector<double> cluster_bootstrap(const LoggedPanel& panel, int replicates,
                                      const PanelStatistic& statistic, std::uint64_t seed,
                                      ExecutionPolicy policy = ExecutionPolicy::Parallel);

enum class OpeEstimator { Snips, Dr };
OpeEstimator parse_estimator(const std::string& name);
std::string estimator_name(OpeEstimator estimator);

struct OpeRow {
  std::string estimator;
  long checkpoint = 0;
  double value = 0.0;
  double ess = 0.0;
  double match_rate = 0.0;
  int replicate = -1;  // -1 for the original panel
};

using AgentFactory = std::function<std::unique_ptr<Agent>(std::uint64_t seed)>;

struct OpeRunConfig {
  std::vector<OpeEstimator> estimators = {OpeEstimator::Snips};
  std::vector<long> checkpoints = {1000, 2000, 5000, 10000};
  int bootstrap = 0;
  std::uint64_t seed = 42;
  DrOptions dr;
};

// Replays a fresh agent on the panel (and on each bootstrap replicate) and
// evaluates the estimators on row prefixes.  Checkpoints beyond the panel are
// dropped and the full length is always included.
std::vector<OpeRow> run_ope(const LoggedPanel& panel, const AgentFactory& make_agent,
                            const OpeRunConfig& config,
                            ExecutionPolicy policy = ExecutionPolicy::Parallel);

// Agent that samples from a fixed distribution regardless of context.
class FixedPolicyAgent : public Agent {
 public:
  FixedPolicyAgent(std::vector<double> probs, std::uint64_t seed);
  std::string name() const override { return "fixed"; }
  int num_arms() const override { return static_cast<int>(probs_.size()); }
  int select(std::span<const double>) override;
  void update(std::span<const double>, int, double) override {}
  std::vector<double> policy_distribution(std::span<const double>) override { return probs_; }

 private:
  std::vector<double> probs_;
  Rng rng_;
};

}  // namespace bandit_forest
