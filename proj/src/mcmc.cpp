#include "bandit_forest/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace bandit_forest {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

Proposal infeasible(MoveKind kind) {
  Proposal p;
  p.kind = kind;
  p.feasible = false;
  return p;
}

// log of the probability that GROW picks (leaf, feature, cut) on `tree`.
double log_grow_prob(const Tree& tree, int leaf, int feature, int cut, const SplitGrid& grid,
                     std::span<const double> s, const PriorConfig& prior) {
  const std::vector<CutRange> ranges = node_ranges(tree, leaf, grid);
  const double mass = admissible_mass(ranges, s);
  const CutRange r = ranges[feature];
  if (!(mass > 0.0) || !(s[feature] > 0.0) || cut < r.lo || cut > r.hi) return kNegInf;
  const double n_growable = static_cast<double>(growable_leaves(tree, grid, s).size());
  return safe_log(prior.proposal.grow) - std::log(n_growable) + std::log(s[feature] / mass) -
         std::log(double(r.count()));
}

double log_prune_prob(const Tree& tree, const PriorConfig& prior) {
  const double n_prunable = static_cast<double>(tree.prunable_nodes().size());
  return safe_log(prior.proposal.prune) - std::log(n_prunable);
}

// log probability that CHANGE at `node` draws the rule (feature, cut), given the node's cell.
double log_rule_prob(std::span<const CutRange> ranges, int feature, int cut,
                     std::span<const double> s) {
  const double mass = admissible_mass(ranges, s);
  const CutRange r = ranges[feature];
  if (!(mass > 0.0) || !(s[feature] > 0.0) || cut < r.lo || cut > r.hi) return kNegInf;
  return std::log(s[feature] / mass) - std::log(double(r.count()));
}

// Nodes outside the edited subtree keep their cells, so only that subtree
// enters the prior ratio.
void finish(Proposal& p, const Tree& current, const SplitGrid& grid, std::span<const double> s,
            const PriorConfig& prior) {
  std::vector<CutRange> ranges = node_ranges(current, p.node, grid);
  const double after = log_subtree_prior(p.tree, p.node, ranges, s, prior.structure);
  if (after == kNegInf) {
    p.log_prior_ratio = kNegInf;
    return;
  }
  p.log_prior_ratio = after - log_subtree_prior(current, p.node, ranges, s, prior.structure);
}

void collect_subtree_leaves(const Tree& tree, int start, std::vector<int>& out, std::vector<int>& stack) {
  out.clear();
  stack.assign(1, start);
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const Node& n = tree.node(id);
    if (n.is_leaf()) {
      out.push_back(id);
    } else {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
}

}  // namespace

Rescaled rescale_response(std::span<const double> y) {
  if (y.empty()) throw std::invalid_argument("rescale_response: empty response");
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  Rescaled out;
  if (*hi == *lo) {
    out.map = RescaleMap{y[0], 1.0, true};
    out.values.assign(y.size(), 0.0);
    return out;
  }
  out.map = RescaleMap{(*hi + *lo) / 2.0, (*hi - *lo) / 2.0, false};
  out.values.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out.values[i] = out.map.to_scaled(y[i]);
  return out;
}

double calibrate_lambda_sigma(double sigma_hat, double nu, double q) {
  if (!(sigma_hat > 0.0) || !(nu > 0.0) || !(q > 0.0 && q < 1.0))
    throw std::invalid_argument("calibrate_lambda_sigma: need sigma_hat > 0, nu > 0, q in (0,1)");
  // P(sigma^2 < c) for InvGamma(a, b) is Q(a, b / c); solve Q(nu/2, nu*lambda/(2 c)) = q.
  const double z = boost::math::gamma_q_inv(nu / 2.0, q);
  return 2.0 * sigma_hat * sigma_hat * z / nu;
}

double leaf_marginal_loglik(double n, double S, double SS, double sigma2, double sigma_mu2) {
  if (n <= 0.0) return 0.0;
  const double denom = sigma2 + n * sigma_mu2;
  return -0.5 * n * std::log(2.0 * std::numbers::pi * sigma2) + 0.5 * std::log(sigma2 / denom) -
         SS / (2.0 * sigma2) + sigma_mu2 * S * S / (2.0 * sigma2 * denom);
}

GaussianMoments leaf_posterior(double n, double S, double sigma2, double sigma_mu2) {
  if (!(sigma_mu2 > 0.0)) return {0.0, 0.0};
  const double precision = n + sigma2 / sigma_mu2;
  return {S / precision, sigma2 / precision};
}

double gibbs_leaf_draw(double n, double S, double sigma2, double sigma_mu2, Rng& rng) {
  const GaussianMoments g = leaf_posterior(n, S, sigma2, sigma_mu2);
  return g.mean + std::sqrt(g.variance) * standard_normal(rng);
}

double gibbs_sigma_update(double n, double sse, double nu, double lambda_sigma, Rng& rng) {
  return sample_inv_gamma((nu + n) / 2.0, (nu * lambda_sigma + sse) / 2.0, rng);
}

std::vector<double> gibbs_split_axis_update(std::span<const double> counts, double zeta,
                                            double xi, Rng& rng) {
  const double base = zeta / std::pow(static_cast<double>(counts.size()), xi);
  std::vector<double> alpha(counts.size());
  for (std::size_t v = 0; v < counts.size(); ++v) alpha[v] = base + counts[v];
  return sample_dirichlet(alpha, rng);
}

std::vector<double> split_counts(const Forest& forest, std::size_t p) {
  std::vector<double> counts(p, 0.0);
  for (const Tree& tree : forest.trees)
    for (int id : tree.internal_nodes()) counts[tree.node(id).feature] += 1.0;
  return counts;
}

namespace {

void growable_rec(const Tree& tree, int id, std::vector<CutRange>& ranges, std::span<const double> s,
                  std::vector<int>& out) {
  const Node& n = tree.node(id);
  if (n.is_leaf()) {
    if (admissible_mass(ranges, s) > 0.0) out.push_back(id);
    return;
  }
  const CutRange saved = ranges[n.feature];
  ranges[n.feature].hi = std::min(saved.hi, n.cut - 1);
  growable_rec(tree, n.left, ranges, s, out);
  ranges[n.feature] = CutRange{std::max(saved.lo, n.cut + 1), saved.hi};
  growable_rec(tree, n.right, ranges, s, out);
  ranges[n.feature] = saved;
}

}  // namespace

std::vector<int> growable_leaves(const Tree& tree, const SplitGrid& grid,
                                 std::span<const double> s) {
  std::vector<int> out;
  std::vector<CutRange> ranges = root_ranges(grid);
  growable_rec(tree, Tree::kRoot, ranges, s, out);
  return out;
}

Proposal make_grow(const Tree& tree, int leaf, int feature, int cut, const SplitGrid& grid,
                   std::span<const double> s, const PriorConfig& prior) {
  const double forward = log_grow_prob(tree, leaf, feature, cut, grid, s, prior);
  if (forward == kNegInf) return infeasible(MoveKind::Grow);
  Proposal p;
  p.kind = MoveKind::Grow;
  p.feasible = true;
  p.node = leaf;
  p.tree = tree;
  p.tree.grow(leaf, feature, cut, grid.threshold(feature, cut));
  p.log_transition_ratio = log_prune_prob(p.tree, prior) - forward;
  finish(p, tree, grid, s, prior);
  return p;
}

Proposal make_prune(const Tree& tree, int node, const SplitGrid& grid, std::span<const double> s,
                    const PriorConfig& prior) {
  const Node& n = tree.node(node);
  if (n.is_leaf() || !tree.node(n.left).is_leaf() || !tree.node(n.right).is_leaf())
    return infeasible(MoveKind::Prune);
  Proposal p;
  p.kind = MoveKind::Prune;
  p.feasible = true;
  p.node = node;
  p.tree = tree;
  p.tree.prune(node);
  const double forward = log_prune_prob(tree, prior);
  const double reverse = log_grow_prob(p.tree, node, n.feature, n.cut, grid, s, prior);
  p.log_transition_ratio = reverse - forward;
  finish(p, tree, grid, s, prior);
  return p;
}

Proposal make_change(const Tree& tree, int node, int feature, int cut, const SplitGrid& grid,
                     std::span<const double> s, const PriorConfig& prior) {
  const Node& n = tree.node(node);
  if (n.is_leaf()) return infeasible(MoveKind::Change);
  const std::vector<CutRange> ranges = node_ranges(tree, node, grid);
  const double forward = log_rule_prob(ranges, feature, cut, s);
  if (forward == kNegInf) return infeasible(MoveKind::Change);
  Proposal p;
  p.kind = MoveKind::Change;
  p.feasible = true;
  p.node = node;
  p.tree = tree;
  p.tree.set_rule(node, feature, cut, grid.threshold(feature, cut));
  p.log_transition_ratio = log_rule_prob(ranges, n.feature, n.cut, s) - forward;
  finish(p, tree, grid, s, prior);
  return p;
}

Proposal make_swap(const Tree& tree, int parent, int child, const SplitGrid& grid,
                   std::span<const double> s, const PriorConfig& prior) {
  const Node& a = tree.node(parent);
  const Node& b = tree.node(child);
  if (a.is_leaf() || b.is_leaf() || b.parent != parent) return infeasible(MoveKind::Swap);
  Proposal p;
  p.kind = MoveKind::Swap;
  p.feasible = true;
  p.node = parent;
  p.tree = tree;
  p.tree.set_rule(parent, b.feature, b.cut, b.threshold);
  p.tree.set_rule(child, a.feature, a.cut, a.threshold);
  p.log_transition_ratio = 0.0;
  finish(p, tree, grid, s, prior);
  return p;
}

Proposal propose_move(const Tree& tree, MoveKind kind, const SplitGrid& grid,
                      std::span<const double> s, const PriorConfig& prior, Rng& rng) {
  switch (kind) {
    case MoveKind::Grow: {
      const std::vector<int> candidates = growable_leaves(tree, grid, s);
      if (candidates.empty()) return infeasible(kind);
      const int leaf = candidates[uniform_index(candidates.size(), rng)];
      const std::vector<CutRange> ranges = node_ranges(tree, leaf, grid);
      const int v = sample_admissible_axis(ranges, s, rng);
      const int cut = ranges[v].lo + static_cast<int>(uniform_index(ranges[v].count(), rng));
      return make_grow(tree, leaf, v, cut, grid, s, prior);
    }
    case MoveKind::Prune: {
      const std::vector<int> candidates = tree.prunable_nodes();
      if (candidates.empty()) return infeasible(kind);
      return make_prune(tree, candidates[uniform_index(candidates.size(), rng)], grid, s, prior);
    }
    case MoveKind::Change: {
      const std::vector<int> candidates = tree.internal_nodes();
      if (candidates.empty()) return infeasible(kind);
      const int node = candidates[uniform_index(candidates.size(), rng)];
      const std::vector<CutRange> ranges = node_ranges(tree, node, grid);
      const int v = sample_admissible_axis(ranges, s, rng);
      if (v < 0) return infeasible(kind);
      const int cut = ranges[v].lo + static_cast<int>(uniform_index(ranges[v].count(), rng));
      return make_change(tree, node, v, cut, grid, s, prior);
    }
    case MoveKind::Swap: {
      const auto candidates = tree.swappable_pairs();
      if (candidates.empty()) return infeasible(kind);
      const auto [parent, child] = candidates[uniform_index(candidates.size(), rng)];
      return make_swap(tree, parent, child, grid, s, prior);
    }
  }
  return infeasible(kind);
}

Proposal propose_structure(const Tree& tree, const SplitGrid& grid, std::span<const double> s,
                           const PriorConfig& prior, Rng& rng) {
  const double probs[] = {prior.proposal.grow, prior.proposal.prune, prior.proposal.change,
                          prior.proposal.swap};
  const std::size_t k = sample_categorical(probs, rng);
  return propose_move(tree, static_cast<MoveKind>(k), grid, s, prior, rng);
}

void MoveCounters::record(MoveKind kind, bool accept) {
  ++attempted[static_cast<int>(kind)];
  if (accept) ++accepted[static_cast<int>(kind)];
}

std::int64_t MoveCounters::total_attempted() const {
  std::int64_t t = 0;
  for (auto v : attempted) t += v;
  return t;
}

std::int64_t MoveCounters::total_accepted() const {
  std::int64_t t = 0;
  for (auto v : accepted) t += v;
  return t;
}

double MoveCounters::rate(MoveKind kind) const {
  const auto a = attempted[static_cast<int>(kind)];
  return a > 0 ? double(accepted[static_cast<int>(kind)]) / double(a) : 0.0;
}

double MoveCounters::overall_rate() const {
  const auto a = total_attempted();
  return a > 0 ? double(total_accepted()) / double(a) : 0.0;
}

MoveCounters& MoveCounters::operator+=(const MoveCounters& other) {
  for (int k = 0; k < kNumMoveKinds; ++k) {
    attempted[k] += other.attempted[k];
    accepted[k] += other.accepted[k];
  }
  return *this;
}

void SamplerConfig::validate() const {
  prior.validate();
  if (n_burn < 0) throw std::invalid_argument("n_burn must be >= 0");
  if (n_post < 1) throw std::invalid_argument("n_post must be >= 1");
  if (n_chains < 1) throw std::invalid_argument("n_chains must be >= 1");
  if (min_leaf_size < 0) throw std::invalid_argument("min_leaf_size must be >= 0");
  if (prior.n_max > 65535) throw std::invalid_argument("n_max must be <= 65535");
  if (fixed_sigma2 && !(*fixed_sigma2 > 0.0))
    throw std::invalid_argument("fixed sigma2 must be > 0");
}

std::vector<double> posterior_predict(const DrawPool& pool, std::span<const double> x) {
  std::vector<double> out(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) out[i] = pool.predict_draw(i, x);
  return out;
}

Chain::Chain(const Matrix& X, std::span<const double> y_scaled, const SplitGrid& grid,
             const SamplerConfig& config, double lambda_sigma,
             std::optional<double> fixed_sigma2, std::uint64_t seed)
    : X_(X),
      y_(y_scaled.begin(), y_scaled.end()),
      grid_(grid),
      config_(config),
      lambda_sigma_(lambda_sigma),
      fixed_sigma2_(fixed_sigma2),
      rng_(seed),
      n_(X.rows()),
      p_(X.cols()) {
  if (y_.size() != n_) throw std::invalid_argument("Chain: X rows and y length differ");
  if (grid.num_features() != p_) throw std::invalid_argument("Chain: grid width mismatch");
  const double sd = leaf_prior_sd(config.prior.kappa, config.prior.m);
  sigma_mu2_ = sd * sd;
  bins_.resize(n_ * p_);
  for (std::size_t v = 0; v < p_; ++v)
    for (std::size_t i = 0; i < n_; ++i)
      bins_[v * n_ + i] = static_cast<std::uint16_t>(grid.bin(v, X(i, v)));
  partial_.resize(n_);
  new_leaf_.resize(n_);
}

void Chain::initialize_from_prior() {
  const PriorConfig& prior = config_.prior;
  s_ = sample_split_axis_probs(prior.split_axis, p_, rng_);
  sigma2_ = fixed_sigma2_ ? *fixed_sigma2_
                          : sample_inv_gamma(prior.nu / 2.0, prior.nu * lambda_sigma_ / 2.0, rng_);
  forest_.trees.clear();
  for (int j = 0; j < prior.m; ++j)
    forest_.trees.push_back(sample_tree_from_prior(prior, grid_, s_, rng_));
  rebuild_caches();
}

void Chain::set_state(Forest forest, double sigma2, std::vector<double> s) {
  if (forest.trees.size() != static_cast<std::size_t>(config_.prior.m))
    throw std::invalid_argument("set_state: forest size differs from prior.m");
  if (s.size() != p_) throw std::invalid_argument("set_state: s has wrong length");
  forest_ = std::move(forest);
  sigma2_ = fixed_sigma2_ ? *fixed_sigma2_ : sigma2;
  s_ = std::move(s);
  rebuild_caches();
}

void Chain::rebuild_caches() {
  leaf_of_row_.assign(forest_.trees.size(), std::vector<std::int32_t>(n_));
  residual_ = y_;
  for (std::size_t j = 0; j < forest_.trees.size(); ++j) {
    const Tree& tree = forest_.trees[j];
    for (std::size_t i = 0; i < n_; ++i) {
      const int leaf = route_binned(tree, Tree::kRoot, i);
      leaf_of_row_[j][i] = leaf;
      residual_[i] -= tree.node(leaf).value;
    }
  }
}

int Chain::route_binned(const Tree& tree, int start, std::size_t row) const {
  int id = start;
  while (!tree.node(id).is_leaf()) {
    const Node& n = tree.node(id);
    id = bins_[n.feature * n_ + row] <= n.cut ? n.left : n.right;
  }
  return id;
}

double Chain::reduced_loglik(double n, double S) const {
  // Leaf marginal likelihood without the SS and 2*pi*sigma^2 terms, which
  // cancel in any ratio over the same rows.
  const double denom = sigma2_ + n * sigma_mu2_;
  return 0.5 * std::log(sigma2_ / denom) + sigma_mu2_ * S * S / (2.0 * sigma2_ * denom);
}

bool Chain::mh_step(int tree_index) {
  Tree& tree = forest_.trees[tree_index];
  std::vector<std::int32_t>& leaf = leaf_of_row_[tree_index];

  const int cap = tree.capacity();
  old_n_.assign(cap, 0.0);
  old_sum_.assign(cap, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    const int l = leaf[i];
    const double r = residual_[i] + tree.node(l).value;
    partial_[i] = r;
    old_n_[l] += 1.0;
    old_sum_[l] += r;
  }

  bool accepted = false;
  std::vector<int>& new_leaves = new_leaves_;
  new_leaves.clear();
  if (config_.update_structure) {
    Proposal prop = propose_structure(tree, grid_, s_, config_.prior, rng_);
    if (prop.feasible && prop.log_prior_ratio != -std::numeric_limits<double>::infinity()) {
      const Tree& next = prop.tree;
      in_subtree_.assign(cap, 0);
      {
        std::vector<int>& stack = stack_;
        stack.assign(1, prop.node);
        while (!stack.empty()) {
          const int id = stack.back();
          stack.pop_back();
          in_subtree_[id] = 1;
          const Node& nd = tree.node(id);
          if (!nd.is_leaf()) {
            stack.push_back(nd.left);
            stack.push_back(nd.right);
          }
        }
      }
      new_n_.assign(next.capacity(), 0.0);
      new_sum_.assign(next.capacity(), 0.0);
      for (std::size_t i = 0; i < n_; ++i) {
        if (!in_subtree_[leaf[i]]) continue;
        const int l = route_binned(next, prop.node, i);
        new_leaf_[i] = l;
        new_n_[l] += 1.0;
        new_sum_[l] += partial_[i];
      }
      collect_subtree_leaves(next, prop.node, new_leaves, stack_);
      bool large_enough = true;
      double log_lik_ratio = 0.0;
      for (int l : new_leaves) {
        if (new_n_[l] < config_.min_leaf_size) large_enough = false;
        log_lik_ratio += reduced_loglik(new_n_[l], new_sum_[l]);
      }
      std::vector<int>& old_leaves = old_leaves_;
      collect_subtree_leaves(tree, prop.node, old_leaves, stack_);
      for (int l : old_leaves) log_lik_ratio -= reduced_loglik(old_n_[l], old_sum_[l]);

      if (large_enough) {
        const double log_alpha =
            prop.log_prior_ratio + prop.log_transition_ratio + log_lik_ratio;
        if (!std::isnan(log_alpha)) {
          accepted = log_alpha >= 0.0 || std::log(uniform01(rng_)) < log_alpha;
        }
      }
      if (accepted) {
        for (std::size_t i = 0; i < n_; ++i)
          if (in_subtree_[leaf[i]]) leaf[i] = new_leaf_[i];
        tree = std::move(prop.tree);
      }
    }
    counters_.record(prop.kind, accepted);
  }

  // Leaf Gibbs on the final structure.  Leaves in the edited subtree take
  // their statistics from the proposal pass, all others keep the old ones.
  is_new_leaf_.assign(tree.capacity(), 0);
  if (accepted)
    for (int l : new_leaves) is_new_leaf_[l] = 1;
  for (int l : tree.leaves()) {
    double n = 0.0, S = 0.0;
    if (is_new_leaf_[l]) {
      n = new_n_[l];
      S = new_sum_[l];
    } else {
      n = old_n_[l];
      S = old_sum_[l];
    }
    tree.node(l).value = gibbs_leaf_draw(n, S, sigma2_, sigma_mu2_, rng_);
  }
  for (std::size_t i = 0; i < n_; ++i) residual_[i] = partial_[i] - tree.node(leaf[i]).value;
  return accepted;
}

namespace {

// A node whose cell has no available cut on some axes.  Only such nodes make
// the tree prior depend on s beyond the prod s_v^c_v factor.
struct BlockedNode {
  int depth = 0;
  bool leaf = false;
  std::vector<int> empty_axes;
};

void collect_blocked(const Tree& tree, int id, std::vector<CutRange>& ranges, std::vector<BlockedNode>& out) {
  const Node& n = tree.node(id);
  BlockedNode b;
  for (std::size_t v = 0; v < ranges.size(); ++v)
    if (ranges[v].count() == 0) b.empty_axes.push_back(static_cast<int>(v));
  if (!b.empty_axes.empty()) {
    b.depth = n.depth;
    b.leaf = n.is_leaf();
    out.push_back(std::move(b));
  }
  if (n.is_leaf()) return;
  const CutRange saved = ranges[n.feature];
  ranges[n.feature].hi = std::min(saved.hi, n.cut - 1);
  collect_blocked(tree, n.left, ranges, out);
  ranges[n.feature] = CutRange{std::max(saved.lo, n.cut + 1), saved.hi};
  collect_blocked(tree, n.right, ranges, out);
  ranges[n.feature] = saved;
}

}  // namespace

void Chain::update_split_axis() {
  const SplitAxisPrior& axis = config_.prior.split_axis;
  const std::vector<double> counts = split_counts(forest_, p_);
  std::vector<double> proposal = gibbs_split_axis_update(counts, axis.zeta, axis.xi, rng_);
  // The conjugate draw ignores the cell-dependent normalization of the tree
  // prior.  An independence MH correction keeps the target exact.  With
  // h(s) = tree prior / prod s_v^c_v, only nodes with blocked axes depend on
  // s, so it accepts with probability 1 whenever every node can split on
  // every axis.
  std::vector<BlockedNode> blocked;
  std::vector<CutRange> ranges = root_ranges(grid_);
  for (const Tree& tree : forest_.trees) collect_blocked(tree, Tree::kRoot, ranges, blocked);
  if (blocked.empty()) {
    s_ = std::move(proposal);
    return;
  }
  const StructurePrior& structure = config_.prior.structure;
  auto log_h = [&](const std::vector<double>& s) {
    for (std::size_t v = 0; v < p_; ++v)
      if (counts[v] > 0.0 && !(s[v] > 0.0)) return kNegInf;
    double total_mass = 0.0;
    for (double x : s) total_mass += x;
    double total = 0.0;
    for (const BlockedNode& b : blocked) {
      double mass = total_mass;
      for (int v : b.empty_axes) mass -= s[v];
      mass = std::clamp(mass, 0.0, 1.0);
      const double p = effective_split_prob(b.depth, mass, structure);
      if (b.leaf) {
        total += p >= 1.0 ? kNegInf : std::log1p(-p);
      } else {
        total += safe_log(p) - safe_log(mass);
      }
    }
    return total;
  };
  const double current = log_h(s_);
  const double next = log_h(proposal);
  if (next == kNegInf) return;
  const double log_alpha = next - current;
  if (current == kNegInf || log_alpha >= 0.0 || std::log(uniform01(rng_)) < log_alpha) {
    s_ = std::move(proposal);
  }
}

void Chain::sweep() {
  for (std::size_t j = 0; j < forest_.trees.size(); ++j) mh_step(static_cast<int>(j));
  if (!fixed_sigma2_) {
    double sse = 0.0;
    for (double e : residual_) sse += e * e;
    sigma2_ = gibbs_sigma_update(double(n_), sse, config_.prior.nu, lambda_sigma_, rng_);
  }
  if (config_.prior.split_axis.kind == SplitAxisPriorKind::DirichletSparse) update_split_axis();
}

double Chain::residual_drift() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const double fresh = y_[i] - forest_.predict(X_.row(i));
    worst = std::max(worst, std::abs(fresh - residual_[i]));
  }
  return worst;
}

bool Chain::leaf_cache_consistent() const {
  for (std::size_t j = 0; j < forest_.trees.size(); ++j)
    for (std::size_t i = 0; i < n_; ++i)
      if (forest_.trees[j].route(X_.row(i)) != leaf_of_row_[j][i]) return false;
  return true;
}

std::uint64_t chain_seed(std::uint64_t seed, long refresh_round, int chain) {
  return derive_seed(seed, {static_cast<std::uint64_t>(refresh_round),
                            static_cast<std::uint64_t>(chain)});
}

RefreshInput prepare_refresh(const Matrix& X, std::span<const double> y,
                             const SamplerConfig& config) {
  config.validate();
  if (X.rows() == 0 || y.empty()) throw std::invalid_argument("refresh needs at least one row");
  if (X.rows() != y.size()) throw std::invalid_argument("refresh: X rows and y length differ");
  RefreshInput in;
  in.X = &X;
  in.rescaled = rescale_response(y);
  in.grid = build_split_grid(X, config.prior.n_max);
  double sigma_hat = 0.1;
  const auto& ys = in.rescaled.values;
  if (ys.size() >= 2 && !in.rescaled.map.degenerate) {
    double mean = 0.0;
    for (double v : ys) mean += v;
    mean /= double(ys.size());
    double ss = 0.0;
    for (double v : ys) ss += (v - mean) * (v - mean);
    sigma_hat = std::sqrt(ss / double(ys.size() - 1));
  }
  in.lambda_sigma = calibrate_lambda_sigma(sigma_hat, config.prior.nu, config.prior.q);
  if (config.fixed_sigma2) {
    const double scale = in.rescaled.map.scale();
    in.fixed_sigma2_scaled = *config.fixed_sigma2 / (scale * scale);
  }
  return in;
}

ChainOutput run_chain(const RefreshInput& input, const SamplerConfig& config, std::uint64_t seed,
                      long refresh_round, int chain) {
  ChainOutput out;
  const double scale2 = input.rescaled.map.scale() * input.rescaled.map.scale();
  const std::size_t p = input.X->cols();
  out.draws.reserve(config.n_post);
  Rng rng(chain_seed(seed, refresh_round, chain));
  if (input.rescaled.map.degenerate) {
    // Constant response: every draw is the zero forest around the constant.
    const PriorConfig& prior = config.prior;
    for (int k = 0; k < config.n_post; ++k) {
      Draw d;
      d.forest = CompactForest::constant(prior.m, 0.0);
      d.sigma2 = input.fixed_sigma2_scaled
                     ? *input.fixed_sigma2_scaled * scale2
                     : sample_inv_gamma(prior.nu / 2.0, prior.nu * input.lambda_sigma / 2.0, rng) *
                           scale2;
      d.s = sample_split_axis_probs(prior.split_axis, p, rng);
      d.chain = chain;
      out.draws.push_back(std::move(d));
    }
    return out;
  }
  Chain c(*input.X, input.rescaled.values, input.grid, config, input.lambda_sigma,
          input.fixed_sigma2_scaled, chain_seed(seed, refresh_round, chain));
  c.initialize_from_prior();
  for (int it = 0; it < config.n_burn; ++it) c.sweep();
  for (int it = 0; it < config.n_post; ++it) {
    c.sweep();
    out.draws.push_back(Draw{CompactForest(c.forest()), c.sigma2() * scale2, c.s(), chain});
  }
  out.counters = c.counters();
  return out;
}

DrawPool assemble_pool(const RefreshInput& input, const SamplerConfig& config,
                       long refresh_round, std::vector<ChainOutput> outputs) {
  DrawPool pool;
  pool.rescale = input.rescaled.map;
  pool.refresh_round = refresh_round;
  pool.n_chains = config.n_chains;
  pool.n_post = config.n_post;
  pool.draws.reserve(std::size_t(config.n_chains) * config.n_post);
  for (ChainOutput& o : outputs) {
    pool.counters += o.counters;
    pool.chain_counters.push_back(o.counters);
    for (Draw& d : o.draws) pool.draws.push_back(std::move(d));
  }
  return pool;
}

}  // namespace bandit_forest
