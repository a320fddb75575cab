#include "bandit_forest/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace bandit_forest {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

double SplitAxisPrior::concentration(std::size_t p) const {
  return zeta / std::pow(static_cast<double>(p), xi);
}

const char* move_kind_name(MoveKind kind) {
  switch (kind) {
    case MoveKind::Grow: return "grow";
    case MoveKind::Prune: return "prune";
    case MoveKind::Change: return "change";
    case MoveKind::Swap: return "swap";
  }
  return "unknown";
}

double ProposalProbs::of(MoveKind kind) const {
  switch (kind) {
    case MoveKind::Grow: return grow;
    case MoveKind::Prune: return prune;
    case MoveKind::Change: return change;
    case MoveKind::Swap: return swap;
  }
  return 0.0;
}

void PriorConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (m < 1) fail("prior.m must be >= 1");
  if (structure.kind == StructurePriorKind::DepthGeometric) {
    if (!(structure.alpha > 0.0 && structure.alpha < 0.5))
      fail("depth-geometric alpha must lie in (0, 0.5)");
  } else {
    if (!(structure.alpha > 0.0 && structure.alpha < 1.0))
      fail("original prior alpha must lie in (0, 1)");
    if (!(structure.beta >= 0.0)) fail("original prior beta must be >= 0");
  }
  if (!(kappa > 0.0)) fail("kappa must be > 0");
  if (n_max < 1) fail("n_max must be >= 1");
  if (!(nu > 0.0)) fail("nu must be > 0");
  if (!(q > 0.0 && q < 1.0)) fail("q must lie in (0, 1)");
  if (split_axis.kind == SplitAxisPriorKind::DirichletSparse &&
      !(split_axis.zeta > 0.0 && split_axis.xi >= 0.0))
    fail("dirichlet prior needs zeta > 0 and xi >= 0");
  const double probs[] = {proposal.grow, proposal.prune, proposal.change, proposal.swap};
  double total = 0.0;
  for (double v : probs) {
    if (!(v >= 0.0)) fail("proposal probabilities must be >= 0");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) fail("proposal probabilities must sum to 1");
}

namespace {

double int_pow(double base, int exp) {
  double out = 1.0;
  for (; exp > 0; exp >>= 1, base *= base)
    if (exp & 1) out *= base;
  return out;
}

}  // namespace

double split_prob(int depth, const StructurePrior& prior) {
  if (prior.kind == StructurePriorKind::DepthGeometric) return int_pow(prior.alpha, depth);
  return prior.alpha * std::pow(1.0 + depth, -prior.beta);
}

double leaf_prior_sd(double kappa, int m) { return 0.5 / (kappa * std::sqrt(double(m))); }

SplitGrid::SplitGrid(std::vector<std::vector<double>> thresholds)
    : thresholds_(std::move(thresholds)) {}

bool SplitGrid::contains(std::size_t feature, double value) const {
  const auto& t = thresholds_[feature];
  return std::binary_search(t.begin(), t.end(), value);
}

int SplitGrid::bin(std::size_t feature, double x) const {
  const auto& t = thresholds_[feature];
  return static_cast<int>(std::lower_bound(t.begin(), t.end(), x) - t.begin());
}

SplitGrid build_split_grid(const Matrix& X, int n_max) {
  if (X.rows() == 0 || X.cols() == 0) throw std::invalid_argument("no data");
  if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  const std::size_t n = X.rows();
  std::vector<std::vector<double>> out(X.cols());
  std::vector<double> column;
  for (std::size_t v = 0; v < X.cols(); ++v) {
    column = X.column(v);
    std::sort(column.begin(), column.end());
    auto& t = out[v];
    t.reserve(std::min<std::size_t>(n_max, n));
    for (std::size_t k = 0; k < static_cast<std::size_t>(n_max); ++k) {
      const double value = column[k * n / n_max];
      if (t.empty() || value > t.back()) t.push_back(value);
    }
  }
  return SplitGrid(std::move(out));
}

Tree::Tree() {
  nodes_.emplace_back();
  live_.push_back(1);
}

int Tree::allocate(int parent, int depth) {
  int id;
  if (!free_.empty()) {
    id = free_.back();
    free_.pop_back();
    nodes_[id] = Node{};
    live_[id] = 1;
  } else {
    id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    live_.push_back(1);
  }
  nodes_[id].parent = parent;
  nodes_[id].depth = depth;
  return id;
}

int Tree::grow(int leaf, int feature, int cut, double threshold) {
  if (!nodes_[leaf].is_leaf()) throw std::logic_error("grow on internal node");
  const int depth = nodes_[leaf].depth + 1;
  const int l = allocate(leaf, depth);
  const int r = allocate(leaf, depth);
  Node& n = nodes_[leaf];
  n.left = l;
  n.right = r;
  n.feature = feature;
  n.cut = cut;
  n.threshold = threshold;
  return l;
}

void Tree::prune(int id) {
  Node& n = nodes_[id];
  if (n.is_leaf() || !nodes_[n.left].is_leaf() || !nodes_[n.right].is_leaf())
    throw std::logic_error("prune needs an internal node with two leaf children");
  live_[n.left] = 0;
  live_[n.right] = 0;
  // Push in reverse so the next grow reuses (left, right) in the same order.
  free_.push_back(n.right);
  free_.push_back(n.left);
  n.left = n.right = -1;
  n.feature = -1;
  n.cut = -1;
  n.threshold = 0.0;
}

void Tree::set_rule(int id, int feature, int cut, double threshold) {
  Node& n = nodes_[id];
  n.feature = feature;
  n.cut = cut;
  n.threshold = threshold;
}

std::vector<int> Tree::preorder() const {
  std::vector<int> out;
  out.reserve(nodes_.size());
  std::vector<int> stack;
  stack.reserve(nodes_.size());
  stack.push_back(kRoot);
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    out.push_back(id);
    const Node& n = nodes_[id];
    if (!n.is_leaf()) {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return out;
}

std::vector<int> Tree::leaves() const {
  std::vector<int> out;
  out.reserve(nodes_.size());
  for (int id : preorder())
    if (nodes_[id].is_leaf()) out.push_back(id);
  return out;
}

std::vector<int> Tree::internal_nodes() const {
  std::vector<int> out;
  out.reserve(nodes_.size());
  for (int id : preorder())
    if (!nodes_[id].is_leaf()) out.push_back(id);
  return out;
}

std::vector<int> Tree::prunable_nodes() const {
  std::vector<int> out;
  out.reserve(nodes_.size());
  for (int id : preorder()) {
    const Node& n = nodes_[id];
    if (!n.is_leaf() && nodes_[n.left].is_leaf() && nodes_[n.right].is_leaf())
      out.push_back(id);
  }
  return out;
}

std::vector<std::pair<int, int>> Tree::swappable_pairs() const {
  std::vector<std::pair<int, int>> out;
  for (int id : preorder()) {
    const Node& n = nodes_[id];
    if (n.is_leaf()) continue;
    if (!nodes_[n.left].is_leaf()) out.emplace_back(id, n.left);
    if (!nodes_[n.right].is_leaf()) out.emplace_back(id, n.right);
  }
  return out;
}

int Tree::num_leaves() const {
  int count = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (live_[i] && nodes_[i].is_leaf()) ++count;
  return count;
}

int Tree::route_from(int start, std::span<const double> x) const {
  int id = start;
  while (!nodes_[id].is_leaf()) {
    const Node& n = nodes_[id];
    id = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return id;
}

int Tree::route(std::span<const double> x) const { return route_from(kRoot, x); }

double Forest::predict(std::span<const double> x) const {
  double total = 0.0;
  for (const Tree& t : trees) total += t.predict(x);
  return total;
}

std::vector<CutRange> root_ranges(const SplitGrid& grid) {
  std::vector<CutRange> out(grid.num_features());
  for (std::size_t v = 0; v < out.size(); ++v)
    out[v] = CutRange{0, static_cast<int>(grid.size(v)) - 1};
  return out;
}

std::vector<CutRange> node_ranges(const Tree& tree, int id, const SplitGrid& grid) {
  std::vector<CutRange> ranges = root_ranges(grid);
  std::vector<int> path;
  for (int cur = id; cur != Tree::kRoot; cur = tree.node(cur).parent) path.push_back(cur);
  int parent = Tree::kRoot;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    const Node& p = tree.node(parent);
    CutRange& r = ranges[p.feature];
    if (*it == p.left)
      r.hi = std::min(r.hi, p.cut - 1);
    else
      r.lo = std::max(r.lo, p.cut + 1);
    parent = *it;
  }
  return ranges;
}

double admissible_mass(std::span<const CutRange> ranges, std::span<const double> s) {
  double total = 0.0;
  for (std::size_t v = 0; v < ranges.size(); ++v)
    if (ranges[v].count() > 0 && s[v] > 0.0) total += s[v];
  return std::min(total, 1.0);
}

double effective_split_prob(int depth, double admissible, const StructurePrior& prior) {
  const double miss = std::clamp(1.0 - admissible, 0.0, 1.0);
  return split_prob(depth, prior) * (1.0 - int_pow(miss, kPriorRuleRetries));
}

namespace {

double log_prior_rec(const Tree& tree, int id, std::vector<CutRange>& ranges,
                     std::span<const double> s, const StructurePrior& prior) {
  const Node& n = tree.node(id);
  const double mass = admissible_mass(ranges, s);
  const double p = effective_split_prob(n.depth, mass, prior);
  if (n.is_leaf()) return p >= 1.0 ? kNegInf : std::log1p(-p);
  const CutRange saved = ranges[n.feature];
  if (n.cut < saved.lo || n.cut > saved.hi || !(s[n.feature] > 0.0) || !(p > 0.0))
    return kNegInf;
  double lp = std::log(p) + std::log(s[n.feature] / mass) - std::log(double(saved.count()));
  ranges[n.feature].hi = n.cut - 1;
  lp += log_prior_rec(tree, n.left, ranges, s, prior);
  ranges[n.feature] = CutRange{n.cut + 1, saved.hi};
  if (lp != kNegInf) lp += log_prior_rec(tree, n.right, ranges, s, prior);
  ranges[n.feature] = saved;
  return lp;
}

}  // namespace

double log_subtree_prior(const Tree& tree, int id, std::vector<CutRange>& ranges,
                         std::span<const double> s, const StructurePrior& prior) {
  return log_prior_rec(tree, id, ranges, s, prior);
}

namespace {

void sample_rec(Tree& tree, int id, std::vector<CutRange>& ranges, const PriorConfig& prior,
                const SplitGrid& grid, std::span<const double> s, double sigma_mu, Rng& rng) {
  const int depth = tree.node(id).depth;
  int feature = -1;
  if (uniform01(rng) < split_prob(depth, prior.structure)) {
    for (int attempt = 0; attempt < kPriorRuleRetries; ++attempt) {
      const std::size_t v = sample_categorical(s, rng);
      if (v < ranges.size() && ranges[v].count() > 0) {
        feature = static_cast<int>(v);
        break;
      }
    }
  }
  if (feature < 0) {
    tree.node(id).value = sigma_mu * standard_normal(rng);
    return;
  }
  const CutRange saved = ranges[feature];
  const int cut = saved.lo + static_cast<int>(uniform_index(saved.count(), rng));
  const int left = tree.grow(id, feature, cut, grid.threshold(feature, cut));
  const int right = tree.node(id).right;
  ranges[feature].hi = cut - 1;
  sample_rec(tree, left, ranges, prior, grid, s, sigma_mu, rng);
  ranges[feature] = CutRange{cut + 1, saved.hi};
  sample_rec(tree, right, ranges, prior, grid, s, sigma_mu, rng);
  ranges[feature] = saved;
}

}  // namespace

double log_tree_prior(const Tree& tree, const SplitGrid& grid, std::span<const double> s,
                      const StructurePrior& prior) {
  std::vector<CutRange> ranges = root_ranges(grid);
  return log_prior_rec(tree, Tree::kRoot, ranges, s, prior);
}

int sample_admissible_axis(std::span<const CutRange> ranges, std::span<const double> s,
                           Rng& rng) {
  std::vector<double> w(ranges.size(), 0.0);
  for (std::size_t v = 0; v < ranges.size(); ++v)
    if (ranges[v].count() > 0 && s[v] > 0.0) w[v] = s[v];
  const std::size_t v = sample_categorical(w, rng);
  return v < w.size() ? static_cast<int>(v) : -1;
}

Tree sample_tree_from_prior(const PriorConfig& prior, const SplitGrid& grid,
                            std::span<const double> s, Rng& rng) {
  Tree tree;
  std::vector<CutRange> ranges = root_ranges(grid);
  sample_rec(tree, Tree::kRoot, ranges, prior, grid, s, leaf_prior_sd(prior.kappa, prior.m),
             rng);
  return tree;
}

std::vector<double> sample_split_axis_probs(const SplitAxisPrior& prior, std::size_t p,
                                            Rng& rng) {
  if (prior.kind == SplitAxisPriorKind::Uniform) return std::vector<double>(p, 1.0 / p);
  std::vector<double> alpha(p, prior.concentration(p));
  return sample_dirichlet(alpha, rng);
}

CompactForest::CompactForest(const Forest& forest) {
  for (const Tree& tree : forest.trees) {
    std::vector<std::pair<int, std::int32_t>> queue;  // (tree id, compact slot)
    const auto root = static_cast<std::int32_t>(nodes_.size());
    roots_.push_back(root);
    nodes_.push_back({});
    queue.emplace_back(Tree::kRoot, root);
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const auto [id, slot] = queue[head];
      const bandit_forest::Node& n = tree.node(id);
      if (n.is_leaf()) {
        nodes_[slot] = {-1, -1, n.value};
        continue;
      }
      const auto left = static_cast<std::int32_t>(nodes_.size());
      nodes_.push_back({});
      nodes_.push_back({});
      nodes_[slot] = {n.feature, left, n.threshold};
      queue.emplace_back(n.left, left);
      queue.emplace_back(n.right, left + 1);
    }
  }
}

CompactForest CompactForest::constant(std::size_t m, double value) {
  CompactForest out;
  for (std::size_t j = 0; j < m; ++j) {
    out.roots_.push_back(static_cast<std::int32_t>(j));
    out.nodes_.push_back({-1, -1, value});
  }
  return out;
}

double CompactForest::predict(std::span<const double> x) const {
  double total = 0.0;
  const Node* base = nodes_.data();
  for (std::int32_t root : roots_) {
    const Node* n = base + root;
    while (n->feature >= 0) n = base + n->left + (x[n->feature] > n->payload ? 1 : 0);
    total += n->payload;
  }
  return total;
}

void CompactForest::add_split_counts(std::vector<double>& counts) const {
  for (const Node& n : nodes_)
    if (n.feature >= 0) counts[n.feature] += 1.0;
}

Forest CompactForest::expand() const {
  Forest forest;
  for (std::int32_t root : roots_) {
    Tree tree;
    std::vector<std::pair<std::int32_t, int>> stack{{root, Tree::kRoot}};
    while (!stack.empty()) {
      const auto [slot, id] = stack.back();
      stack.pop_back();
      const Node& n = nodes_[slot];
      if (n.feature < 0) {
        tree.node(id).value = n.payload;
        continue;
      }
      const int left = tree.grow(id, n.feature, -1, n.payload);
      const int right = tree.node(id).right;
      stack.emplace_back(n.left + 1, right);
      stack.emplace_back(n.left, left);
    }
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

bool CompactForest::operator==(const CompactForest& other) const {
  if (roots_ != other.roots_ || nodes_.size() != other.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& a = nodes_[i];
    const Node& b = other.nodes_[i];
    if (a.feature != b.feature || a.left != b.left || a.payload != b.payload) return false;
  }
  return true;
}

void write_forest(std::ostream& out, const Forest& forest) {
  char buf[160];
  out << "forest " << forest.trees.size() << '\n';
  for (std::size_t j = 0; j < forest.trees.size(); ++j) {
    const Tree& tree = forest.trees[j];
    const std::vector<int> order = tree.preorder();
    out << "tree " << j << ' ' << order.size() << '\n';
    for (int id : order) {
      const Node& n = tree.node(id);
      const char* side = n.parent < 0 ? "root" : (tree.node(n.parent).left == id ? "left" : "right");
      if (n.is_leaf()) {
        std::snprintf(buf, sizeof buf, "%d %d %s leaf -1 0 %.17g\n", id, n.parent, side, n.value);
      } else {
        std::snprintf(buf, sizeof buf, "%d %d %s split %d %.17g 0\n", id, n.parent, side,
                      n.feature, n.threshold);
      }
      out << buf;
    }
  }
}

Forest read_forest(std::istream& in) {
  auto fail = [](const std::string& msg) { throw std::runtime_error("read_forest: " + msg); };
  std::string word;
  std::size_t num_trees = 0;
  if (!(in >> word >> num_trees) || word != "forest") fail("missing forest header");
  Forest forest;
  for (std::size_t j = 0; j < num_trees; ++j) {
    std::size_t index = 0, count = 0;
    if (!(in >> word >> index >> count) || word != "tree") fail("missing tree header");
    Tree tree;
    std::map<int, int> id_map;                      // file id -> tree id
    std::map<std::pair<int, int>, int> child_slot;  // (file parent, side) -> tree id
    for (std::size_t k = 0; k < count; ++k) {
      int id = 0, parent = 0, feature = 0;
      std::string side, kind, thr_text, value_text;
      if (!(in >> id >> parent >> side >> kind >> feature >> thr_text >> value_text))
        fail("truncated node record");
      int mapped = Tree::kRoot;
      if (side != "root") {
        const auto it = child_slot.find({parent, side == "left" ? 0 : 1});
        if (it == child_slot.end()) fail("node " + std::to_string(id) + " precedes its parent");
        mapped = it->second;
      }
      id_map[id] = mapped;
      if (kind == "split") {
        const int left = tree.grow(mapped, feature, -1, std::stod(thr_text));
        child_slot[{id, 0}] = left;
        child_slot[{id, 1}] = tree.node(mapped).right;
      } else if (kind == "leaf") {
        tree.node(mapped).value = std::stod(value_text);
      } else {
        fail("unknown node kind '" + kind + "'");
      }
    }
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

}  // namespace bandit_forest
