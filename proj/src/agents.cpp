#include "bandit_forest/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bandit_forest {

long refresh_index(long t, const RefreshSchedule& schedule) {
  if (t <= 0) return 0;
  switch (schedule.kind) {
    case RefreshKind::Logarithmic:
      return static_cast<long>(std::ceil(schedule.c * std::log(double(t))));
    case RefreshKind::SquareRoot:
      return static_cast<long>(std::ceil(schedule.c * std::sqrt(double(t))));
    case RefreshKind::EveryN: {
      const long n = std::max(1L, static_cast<long>(schedule.c));
      return t / n;
    }
  }
  return 0;
}

bool refresh_fires(long t, long tau_k, const RefreshSchedule& schedule) {
  if (t == tau_k) return true;
  if (t < tau_k) return false;
  return refresh_index(t, schedule) > refresh_index(t - 1, schedule);
}

std::vector<long> refresh_increase_rounds(const RefreshSchedule& schedule, long horizon) {
  std::vector<long> out;
  for (long t = 1; t <= horizon; ++t)
    if (refresh_index(t, schedule) > refresh_index(t - 1, schedule)) out.push_back(t);
  return out;
}

std::size_t encoded_dim(std::size_t p, int num_arms, Encoding encoding) {
  switch (encoding) {
    case Encoding::Separate: return p;
    case Encoding::OneHot: return p + num_arms;
    case Encoding::Multi: return p * num_arms;
  }
  return p;
}

std::vector<double> encode(std::span<const double> x, int arm, int num_arms, Encoding encoding) {
  std::vector<double> out(encoded_dim(x.size(), num_arms, encoding), 0.0);
  switch (encoding) {
    case Encoding::Separate:
      std::copy(x.begin(), x.end(), out.begin());
      break;
    case Encoding::OneHot:
      out[arm] = 1.0;
      std::copy(x.begin(), x.end(), out.begin() + num_arms);
      break;
    case Encoding::Multi:
      std::copy(x.begin(), x.end(), out.begin() + std::size_t(arm) * x.size());
      break;
  }
  return out;
}

int argmax_min_index(std::span<const double> values) {
  int best = 0;
  for (std::size_t a = 1; a < values.size(); ++a)
    if (values[a] > values[best]) best = static_cast<int>(a);
  return best;
}

int UniformAgent::select(std::span<const double>) {
  return static_cast<int>(uniform_index(k_, rng_));
}

std::vector<double> UniformAgent::policy_distribution(std::span<const double>) {
  return std::vector<double>(k_, 1.0 / k_);
}

std::vector<double> fg_selection_probs(std::span<const double> scores, double lambda) {
  std::vector<double> w(scores.size(), 1.0);
  if (scores.empty()) return w;
  const double top = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    w[j] = std::exp(lambda * (scores[j] - top));
    total += w[j];
  }
  for (double& v : w) v /= total;
  return w;
}

BftsAgent::BftsAgent(BftsConfig config)
    : config_(std::move(config)), rng_(derive_seed(config_.seed, {0x5e1ec7})) {
  if (config_.num_arms < 1) throw std::invalid_argument("bfts: need at least one arm");
  if (config_.num_features < 1) throw std::invalid_argument("bfts: need at least one feature");
  if (config_.tau < 1) throw std::invalid_argument("bfts: tau must be >= 1");
  if (config_.fg) {
    if (!(config_.fg->eta > 0.0)) throw std::invalid_argument("fg: eta must be > 0");
    if (!(config_.fg->lambda >= 0.0)) throw std::invalid_argument("fg: lambda must be >= 0");
    config_.sampler.fixed_sigma2 = 1.0 / (2.0 * config_.fg->eta);
  }
  config_.sampler.validate();
  const std::size_t dim = encoded_dim(config_.num_features, config_.num_arms, config_.encoding);
  X_.assign(model_count(), Matrix(0, dim));
  y_.assign(model_count(), {});
  history_ = Matrix(0, config_.num_features);
  arm_counts_.assign(config_.num_arms, 0);
}

int BftsAgent::model_count() const {
  return config_.encoding == Encoding::Separate ? config_.num_arms : 1;
}

std::size_t BftsAgent::num_draws() const { return pools_.empty() ? 0 : pools_.front().size(); }

double BftsAgent::predict(std::size_t draw, int arm, std::span<const double> x) const {
  if (config_.encoding == Encoding::Separate) return pools_[arm].predict_draw(draw, x);
  const std::vector<double> z = encode(x, arm, config_.num_arms, config_.encoding);
  return pools_.front().predict_draw(draw, z);
}

std::vector<double> BftsAgent::arm_draws(int arm, std::span<const double> x) const {
  std::vector<double> out(num_draws());
  for (std::size_t d = 0; d < out.size(); ++d) out[d] = predict(d, arm, x);
  return out;
}

std::size_t BftsAgent::dataset_size(int arm) const { return arm_counts_[arm]; }

int BftsAgent::greedy_action(std::size_t draw, std::span<const double> x) const {
  int best = 0;
  double best_value = predict(draw, 0, x);
  for (int a = 1; a < config_.num_arms; ++a) {
    const double v = predict(draw, a, x);
    if (v > best_value) {
      best = a;
      best_value = v;
    }
  }
  return best;
}

std::size_t BftsAgent::next_queue_index() {
  if (cursor_ >= queue_.size()) {
    shuffle(queue_, rng_);
    cursor_ = 0;
  }
  return queue_[cursor_++];
}

int BftsAgent::select(std::span<const double> x) {
  const long t = next_round();
  const long tau_k = long(config_.tau) * config_.num_arms;
  if (t <= tau_k) return static_cast<int>((t - 1) % config_.num_arms);
  if (pools_.empty()) throw std::logic_error("refresh never ran");
  std::size_t draw;
  if (config_.fg && config_.fg->lambda > 0.0) {
    const std::vector<double> probs = fg_selection_probs(scores_, config_.fg->lambda);
    draw = sample_categorical(probs, rng_);
  } else {
    draw = next_queue_index();
  }
  last_draw_ = static_cast<long>(draw);
  return greedy_action(draw, x);
}

std::vector<double> BftsAgent::policy_distribution(std::span<const double> x) {
  std::vector<double> out(config_.num_arms, 0.0);
  const long t = next_round();
  const long tau_k = long(config_.tau) * config_.num_arms;
  if (t <= tau_k || pools_.empty()) {
    out[(t - 1) % config_.num_arms] = 1.0;
    return out;
  }
  const std::size_t n = num_draws();
  std::vector<double> weights(n, 1.0 / double(n));
  if (config_.fg && config_.fg->lambda > 0.0) weights = fg_selection_probs(scores_, config_.fg->lambda);
  for (std::size_t d = 0; d < n; ++d) out[greedy_action(d, x)] += weights[d];
  double total = 0.0;
  for (double v : out) total += v;
  for (double& v : out) v /= total;
  return out;
}

void BftsAgent::update(std::span<const double> x, int action, double reward) {
  if (action < 0 || action >= config_.num_arms) throw std::out_of_range("bfts: action out of range");
  if (x.size() != std::size_t(config_.num_features))
    throw std::invalid_argument("bfts: context has wrong dimension");
  const long t = ++updates_;
  ++arm_counts_[action];
  if (config_.encoding == Encoding::Separate) {
    X_[action].append_row(x);
    y_[action].push_back(reward);
  } else {
    X_.front().append_row(encode(x, action, config_.num_arms, config_.encoding));
    y_.front().push_back(reward);
  }
  history_.append_row(x);

  const long tau_k = long(config_.tau) * config_.num_arms;
  refreshed_last_update_ = refresh_fires(t, tau_k, config_.refresh);
  if (refreshed_last_update_) refresh(t);

  if (config_.fg && !pools_.empty()) {
    if (refreshed_last_update_) {
      scores_ = fg_scores(*this, history_, config_.fg->b, config_.policy);
    } else {
      for (std::size_t j = 0; j < scores_.size(); ++j)
        scores_[j] += std::min(config_.fg->b, best_arm_value(*this, j, x));
    }
  }
}

void BftsAgent::refresh(long t) {
  std::vector<RefreshJob> jobs;
  for (int k = 0; k < model_count(); ++k) {
    if (y_[k].empty()) throw std::logic_error("bfts: refresh with an empty arm dataset");
    jobs.push_back(RefreshJob{&X_[k], y_[k], derive_seed(config_.seed, {0xa7, std::uint64_t(k)})});
  }
  pools_ = refresh_pools(jobs, config_.sampler, t, config_.policy);
  refresh_rounds_.push_back(t);
  queue_.resize(pools_.front().size());
  for (std::size_t i = 0; i < queue_.size(); ++i) queue_[i] = i;
  shuffle(queue_, rng_);
  cursor_ = 0;
}

RidgeModel::RidgeModel(std::size_t dim, double lambda)
    : A_(Eigen::MatrixXd::Identity(dim, dim) * lambda), b_(Eigen::VectorXd::Zero(dim)) {}

void RidgeModel::add(std::span<const double> z, double r) {
  const Eigen::Map<const Eigen::VectorXd> v(z.data(), z.size());
  A_.noalias() += v * v.transpose();
  b_ += r * v;
}

Eigen::VectorXd RidgeModel::mean() const { return A_.llt().solve(b_); }

double RidgeModel::mean_score(std::span<const double> z) const {
  const Eigen::Map<const Eigen::VectorXd> v(z.data(), z.size());
  return mean().dot(v);
}

double RidgeModel::variance_score(std::span<const double> z) const {
  const Eigen::Map<const Eigen::VectorXd> v(z.data(), z.size());
  return v.dot(A_.llt().solve(v));
}

Eigen::VectorXd RidgeModel::sample(double scale, Rng& rng) const {
  const Eigen::LLT<Eigen::MatrixXd> llt(A_);
  Eigen::VectorXd z(b_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = standard_normal(rng);
  // A = L L' so L'^-1 z has covariance A^-1.
  const Eigen::VectorXd noise = llt.matrixU().solve(z);
  return llt.solve(b_) + scale * noise;
}

LinearAgentBase::LinearAgentBase(LinearConfig config) : config_(std::move(config)) {
  if (config_.num_arms < 1 || config_.num_features < 1)
    throw std::invalid_argument("linear agent: need arms and features");
  if (!(config_.lambda_ridge > 0.0)) throw std::invalid_argument("linear agent: lambda must be > 0");
  if (config_.encoding == Encoding::Separate) {
    models_.assign(config_.num_arms, RidgeModel(config_.num_features, config_.lambda_ridge));
  } else {
    models_.assign(1, RidgeModel(encoded_dim(config_.num_features, config_.num_arms,
                                             config_.encoding),
                                 config_.lambda_ridge));
  }
}

std::size_t LinearAgentBase::model_index(int arm) const {
  return config_.encoding == Encoding::Separate ? std::size_t(arm) : 0;
}

const RidgeModel& LinearAgentBase::model_for(int arm) const { return models_[model_index(arm)]; }

std::vector<double> LinearAgentBase::features_for(std::span<const double> x, int arm) const {
  return encode(x, arm, config_.num_arms, config_.encoding);
}

void LinearAgentBase::update(std::span<const double> x, int action, double reward) {
  if (action < 0 || action >= config_.num_arms) throw std::out_of_range("linear: action out of range");
  models_[model_index(action)].add(features_for(x, action), reward);
  ++updates_;
}

LinTsAgent::LinTsAgent(LinearConfig config)
    : LinearAgentBase(std::move(config)), rng_(derive_seed(config_.seed, {0x1175})) {}

int LinTsAgent::sampled_action(std::span<const double> x, Rng& rng) const {
  std::vector<Eigen::VectorXd> weights;
  for (const RidgeModel& m : models_) weights.push_back(m.sample(config_.nu, rng));
  std::vector<double> scores(config_.num_arms);
  for (int a = 0; a < config_.num_arms; ++a) {
    const std::vector<double> z = features_for(x, a);
    scores[a] = weights[model_index(a)].dot(Eigen::Map<const Eigen::VectorXd>(z.data(), z.size()));
  }
  return argmax_min_index(scores);
}

int LinTsAgent::select(std::span<const double> x) { return sampled_action(x, rng_); }

std::vector<double> LinTsAgent::policy_distribution(std::span<const double> x) {
  // Monte Carlo votes from a stream keyed by the update count, so asking for
  // the distribution does not perturb the selection stream.
  Rng votes(derive_seed(config_.seed, {0x7015, std::uint64_t(updates_)}));
  std::vector<double> out(config_.num_arms, 0.0);
  for (int k = 0; k < config_.policy_samples; ++k) out[sampled_action(x, votes)] += 1.0;
  for (double& v : out) v /= config_.policy_samples;
  return out;
}

std::vector<double> LinUcbAgent::ucb_scores(std::span<const double> x) const {
  std::vector<double> scores(config_.num_arms);
  for (int a = 0; a < config_.num_arms; ++a) {
    const std::vector<double> z = features_for(x, a);
    const RidgeModel& m = models_[model_index(a)];
    scores[a] = m.mean_score(z) + config_.alpha * std::sqrt(m.variance_score(z));
  }
  return scores;
}

int LinUcbAgent::select(std::span<const double> x) { return argmax_min_index(ucb_scores(x)); }

std::vector<double> LinUcbAgent::policy_distribution(std::span<const double> x) {
  std::vector<double> out(config_.num_arms, 0.0);
  out[select(x)] = 1.0;
  return out;
}

}  // namespace bandit_forest
