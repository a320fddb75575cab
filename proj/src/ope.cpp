#include "bandit_forest/ope.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bandit_forest {

double ReplayResult::match_rate() const {
  if (records.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : records) hits += r.matched;
  return double(hits) / double(records.size());
}

std::vector<double> ReplayResult::weights(std::size_t prefix) const {
  std::vector<double> out;
  for (std::size_t i = 0; i < std::min(prefix, records.size()); ++i) out.push_back(records[i].weight);
  return out;
}

std::vector<double> ReplayResult::rewards(std::size_t prefix) const {
  std::vector<double> out;
  for (std::size_t i = 0; i < std::min(prefix, records.size()); ++i) out.push_back(records[i].reward);
  return out;
}

Matrix ReplayResult::policies(std::size_t prefix) const {
  const std::size_t n = std::min(prefix, records.size());
  Matrix out(n, n ? records[0].policy.size() : 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < records[i].policy.size(); ++a) out(i, a) = records[i].policy[a];
  return out;
}

ReplayResult replay_run(Agent& agent, const LoggedPanel& panel) {
  if (agent.num_arms() != panel.num_arms())
    throw std::invalid_argument("agent has " + std::to_string(agent.num_arms()) +
                                " arms but the panel has " + std::to_string(panel.num_arms()));
  ReplayResult result;
  result.records.reserve(panel.size());
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto x = panel.contexts.row(i);
    const int a = panel.actions[i];
    const double pb = panel.propensities(i, a);
    if (!(pb > 0.0)) throw std::runtime_error("positivity violation at row " + std::to_string(i));
    ReplayRecord rec;
    rec.policy = agent.policy_distribution(x);
    rec.logged_action = a;
    rec.reward = panel.rewards[i];
    rec.weight = rec.policy[a] / pb;
    rec.sampled_action = agent.select(x);
    rec.matched = rec.sampled_action == a;
    if (rec.matched) {
      agent.update(x, a, rec.reward);
      ++result.updates;
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

std::vector<double> estimate_policy_dist(const ArmPredictor& model, std::span<const double> x) {
  const int K = model.num_arms();
  const std::size_t n = model.num_draws();
  if (n == 0) throw std::logic_error("estimate_policy_dist: empty posterior");
  std::vector<std::size_t> votes(K, 0);
  std::vector<double> values(K);
  for (std::size_t d = 0; d < n; ++d) {
    for (int a = 0; a < K; ++a) values[a] = model.predict(d, a, x);
    ++votes[argmax_min_index(values)];
  }
  std::vector<double> out(K);
  for (int a = 0; a < K; ++a) out[a] = double(votes[a]) / double(n);
  return out;
}

double snips(std::span<const double> weights, std::span<const double> rewards) {
  if (weights.size() != rewards.size()) throw std::invalid_argument("snips: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    num += weights[i] * rewards[i];
    den += weights[i];
  }
  if (!(den > 0.0)) throw std::domain_error("snips: weights sum to zero");
  return num / den;
}

double ess(std::span<const double> weights) {
  double s = 0.0, s2 = 0.0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  if (!(s2 > 0.0)) throw std::domain_error("ess: all weights are zero");
  return s * s / s2;
}

namespace {

std::vector<double> with_intercept(std::span<const double> x) {
  std::vector<double> z(x.size() + 1);
  z[0] = 1.0;
  std::copy(x.begin(), x.end(), z.begin() + 1);
  return z;
}

}  // namespace

Matrix cross_fit_outcomes(const LoggedPanel& panel, const DrOptions& options) {
  const std::size_t n = panel.size();
  const int K = panel.num_arms();
  const std::size_t dim = panel.contexts.cols() + 1;
  // fits[f][a] is trained on fold 1 - f; pooled[a] on every row.
  std::vector<std::vector<RidgeModel>> fits(2, std::vector<RidgeModel>(K, RidgeModel(dim, options.lambda_ridge)));
  std::vector<RidgeModel> pooled(K, RidgeModel(dim, options.lambda_ridge));
  std::vector<std::array<std::size_t, 2>> counts(K, {0, 0});
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = with_intercept(panel.contexts.row(i));
    const int a = panel.actions[i];
    const int fold = static_cast<int>(i % 2);
    fits[1 - fold][a].add(z, panel.rewards[i]);
    pooled[a].add(z, panel.rewards[i]);
    ++counts[a][fold];
  }
  std::vector<std::vector<Eigen::VectorXd>> beta(2, std::vector<Eigen::VectorXd>(K));
  for (int f = 0; f < 2; ++f) {
    for (int a = 0; a < K; ++a) {
      const std::size_t train = counts[a][1 - f];
      if (train > 0) beta[f][a] = fits[f][a].mean();
      else if (counts[a][0] + counts[a][1] > 0) beta[f][a] = pooled[a].mean();
      else beta[f][a] = Eigen::VectorXd::Zero(dim);
    }
  }
  Matrix q(n, K);
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = with_intercept(panel.contexts.row(i));
    const Eigen::Map<const Eigen::VectorXd> v(z.data(), z.size());
    for (int a = 0; a < K; ++a) q(i, a) = beta[i % 2][a].dot(v);
  }
  return q;
}

double dr_value(const LoggedPanel& panel, const Matrix& policy, const Matrix& outcomes) {
  const std::size_t n = policy.rows();
  if (n == 0) throw std::invalid_argument("dr_value: no rows");
  if (n > panel.size() || outcomes.rows() < n) throw std::invalid_argument("dr_value: row mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int a = panel.actions[i];
    double plug_in = 0.0;
    for (std::size_t k = 0; k < policy.cols(); ++k) plug_in += policy(i, k) * outcomes(i, k);
    const double w = policy(i, a) / panel.propensities(i, a);
    total += plug_in + w * (panel.rewards[i] - outcomes(i, a));
  }
  return total / double(n);
}

double dr_estimate(const LoggedPanel& panel, const Matrix& policy, const DrOptions& options) {
  if (policy.rows() < panel.size()) {
    std::vector<std::size_t> rows(policy.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const LoggedPanel prefix = panel.subset(rows);
    return dr_value(prefix, policy, cross_fit_outcomes(prefix, options));
  }
  return dr_value(panel, policy, cross_fit_outcomes(panel, options));
}

std::vector<std::size_t> cluster_rows(const LoggedPanel& panel, std::span<const int> clusters) {
  std::vector<std::vector<std::size_t>> members(panel.num_clusters());
  for (std::size_t i = 0; i < panel.size(); ++i) members[panel.clusters[i]].push_back(i);
  for (auto& m : members)
    std::stable_sort(m.begin(), m.end(),
                     [&](std::size_t a, std::size_t b) { return panel.steps[a] < panel.steps[b]; });
  std::vector<std::size_t> rows;
  for (int c : clusters) rows.insert(rows.end(), members.at(c).begin(), members.at(c).end());
  return rows;
}

namespace {

std::vector<int> resample_clusters(int num_clusters, Rng& rng) {
  std::vector<int> picks(num_clusters);
  for (int& c : picks) c = static_cast<int>(uniform_index(num_clusters, rng));
  return picks;
}

}  // namespace

std::vector<double> cluster_bootstrap(const LoggedPanel& panel, int replicates,
                                      const PanelStatistic& statistic, std::uint64_t seed,
                                      ExecutionPolicy policy) {
  if (panel.num_clusters() < 2) throw std::invalid_argument("cluster bootstrap needs at least 2 clusters");
  std::vector<double> out(std::max(replicates, 0));
  auto one = [&](int b) {
    Rng rng(derive_seed(seed, {std::uint64_t(b)}));
    const auto picks = resample_clusters(panel.num_clusters(), rng);
    const auto rows = cluster_rows(panel, picks);
    out[b] = statistic(panel.subset(rows), std::size_t(b));
  };
  if (policy == ExecutionPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int b = 0; b < replicates; ++b) one(b);
  } else {
    for (int b = 0; b < replicates; ++b) one(b);
  }
  return out;
}

OpeEstimator parse_estimator(const std::string& name) {
  if (name == "snips") return OpeEstimator::Snips;
  if (name == "dr") return OpeEstimator::Dr;
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

std::string estimator_name(OpeEstimator estimator) {
  return estimator == OpeEstimator::Snips ? "snips" : "dr";
}

namespace {

std::vector<OpeRow> evaluate_replay(const LoggedPanel& panel, const ReplayResult& replay,
                                    const OpeRunConfig& config, int replicate) {
  std::vector<long> checkpoints;
  for (long c : config.checkpoints)
    if (c >= 1 && c < static_cast<long>(panel.size())) checkpoints.push_back(c);
  checkpoints.push_back(static_cast<long>(panel.size()));
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());

  std::vector<OpeRow> rows;
  for (long c : checkpoints) {
    const auto w = replay.weights(c);
    const auto r = replay.rewards(c);
    std::size_t hits = 0;
    for (long i = 0; i < c; ++i) hits += replay.records[i].matched;
    const double match = double(hits) / double(c);
    double weight_sum = 0.0;
    for (double v : w) weight_sum += v;
    const double e = weight_sum > 0.0 ? ess(w) : 0.0;
    for (OpeEstimator est : config.estimators) {
      OpeRow row;
      row.estimator = estimator_name(est);
      row.checkpoint = c;
      row.ess = e;
      row.match_rate = match;
      row.replicate = replicate;
      if (est == OpeEstimator::Snips) row.value = weight_sum > 0.0 ? snips(w, r) : std::nan("");
      else row.value = dr_estimate(panel, replay.policies(c), config.dr);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace

std::vector<OpeRow> run_ope(const LoggedPanel& panel, const AgentFactory& make_agent,
                            const OpeRunConfig& config, ExecutionPolicy policy) {
  if (panel.size() == 0) throw std::invalid_argument("empty panel");
  std::vector<OpeRow> out;
  {
    auto agent = make_agent(derive_seed(config.seed, {0x0be, 0}));
    const ReplayResult replay = replay_run(*agent, panel);
    out = evaluate_replay(panel, replay, config, -1);
  }
  if (config.bootstrap <= 0) return out;
  if (panel.num_clusters() < 2) throw std::invalid_argument("cluster bootstrap needs at least 2 clusters");

  std::vector<std::vector<OpeRow>> per_rep(config.bootstrap);
  auto one = [&](int b) {
    Rng rng(derive_seed(config.seed, {std::uint64_t(b)}));
    const auto picks = resample_clusters(panel.num_clusters(), rng);
    const LoggedPanel sample = panel.subset(cluster_rows(panel, picks));
    auto agent = make_agent(derive_seed(config.seed, {0x0be, std::uint64_t(b) + 1}));
    per_rep[b] = evaluate_replay(sample, replay_run(*agent, sample), config, b);
  };
  if (policy == ExecutionPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int b = 0; b < config.bootstrap; ++b) one(b);
  } else {
    for (int b = 0; b < config.bootstrap; ++b) one(b);
  }
  for (auto& rows : per_rep) out.insert(out.end(), rows.begin(), rows.end());
  return out;
}

FixedPolicyAgent::FixedPolicyAgent(std::vector<double> probs, std::uint64_t seed)
    : probs_(std::move(probs)), rng_(seed) {
  double total = 0.0;
  for (double p : probs_) {
    if (p < 0.0) throw std::invalid_argument("negative policy probability");
    total += p;
  }
  if (probs_.empty() || std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("policy probabilities must sum to 1");
}

int FixedPolicyAgent::select(std::span<const double>) {
  return static_cast<int>(sample_categorical(probs_, rng_));
}

}  // namespace bandit_forest
