#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "bandit_forest/matrix.hpp"
#include "bandit_forest/rng.hpp"

namespace bandit_forest {

enum class StructurePriorKind { DepthGeometric, Original };

// DepthGeometric: p = alpha^d.  Original: p = alpha (1 + d)^-beta.
struct StructurePrior {
  StructurePriorKind kind = StructurePriorKind::DepthGeometric;
  double alpha = 0.45;
  double beta = 2.0;

  static StructurePrior depth_geometric(double alpha_qd) {
    return {StructurePriorKind::DepthGeometric, alpha_qd, 0.0};
  }
  static StructurePrior original(double alpha_o, double beta_o) {
    return {StructurePriorKind::Original, alpha_o, beta_o};
  }
};

enum class SplitAxisPriorKind { Uniform, DirichletSparse };

struct SplitAxisPrior {
  SplitAxisPriorKind kind = SplitAxisPriorKind::DirichletSparse;
  double zeta = 1.0;
  double xi = 1.0;

  // Symmetric Dirichlet concentration zeta / p^xi.
  double concentration(std::size_t p) const;
};

enum class MoveKind : int { Grow = 0, Prune = 1, Change = 2, Swap = 3 };
inline constexpr int kNumMoveKinds = 4;
const char* move_kind_name(MoveKind kind);

struct ProposalProbs {
  double grow = 0.25;
  double prune = 0.25;
  double change = 0.4;
  double swap = 0.1;

  double of(MoveKind kind) const;
};

struct PriorConfig {
  int m = 100;
  StructurePrior structure;
  double kappa = 2.0;
  int n_max = 100;
  double nu = 3.0;
  double q = 0.90;
  SplitAxisPrior split_axis;
  ProposalProbs proposal;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Number of rule redraws before a prior draw gives up on splitting a node.
inline constexpr int kPriorRuleRetries = 10;

double split_prob(int depth, const StructurePrior& prior);
double leaf_prior_sd(double kappa, int m);

class SplitGrid {
 public:
  SplitGrid() = default;
  explicit SplitGrid(std::vector<std::vector<double>> thresholds);

  std::size_t num_features() const { return thresholds_.size(); }
  std::size_t size(std::size_t feature) const { return thresholds_[feature].size(); }
  const std::vector<double>& thresholds(std::size_t feature) const {
    return thresholds_[feature];
  }
  double threshold(std::size_t feature, int cut) const { return thresholds_[feature][cut]; }
  bool contains(std::size_t feature, double value) const;

  // Index of the first threshold >= x.  x <= threshold(c) iff bin(x) <= c.
  int bin(std::size_t feature, double x) const;

 private:
  std::vector<std::vector<double>> thresholds_;
};

// Nearest-rank quantiles at levels k / n_max, k = 0..n_max-1, deduplicated.
SplitGrid build_split_grid(const Matrix& X, int n_max);

struct Node {
  int parent = -1;
  int left = -1;
  int right = -1;
  int depth = 0;
  int feature = -1;
  int cut = -1;  // index into the split grid; -1 when unknown (deserialized trees)
  double threshold = 0.0;
  double value = 0.0;

  bool is_leaf() const { return left < 0; }
};

// Binary tree with stable node ids.  Pruned ids go to a free list and are
// reused by later grows, so ids outside an edited subtree never move.
class Tree {
 public:
  static constexpr int kRoot = 0;

  Tree();

  const Node& node(int id) const { return nodes_[id]; }
  Node& node(int id) { return nodes_[id]; }
  bool is_live(int id) const { return live_[id] != 0; }
  int capacity() const { return static_cast<int>(nodes_.size()); }

  // Turns a leaf into an internal node.  Returns the new left child id.
  int grow(int leaf, int feature, int cut, double threshold);
  // Collapses an internal node whose children are both leaves.
  void prune(int id);
  void set_rule(int id, int feature, int cut, double threshold);

  std::vector<int> leaves() const;
  std::vector<int> internal_nodes() const;
  // Internal nodes whose two children are leaves.
  std::vector<int> prunable_nodes() const;
  // (parent, child) pairs where both are internal.
  std::vector<std::pair<int, int>> swappable_pairs() const;
  int num_leaves() const;

  int route(std::span<const double> x) const;
  int route_from(int start, std::span<const double> x) const;
  double predict(std::span<const double> x) const { return nodes_[route(x)].value; }

  // Live node ids in depth-first preorder (left before right).
  std::vector<int> preorder() const;

 private:
  int allocate(int parent, int depth);

  std::vector<Node> nodes_;
  std::vector<char> live_;
  std::vector<int> free_;
};

struct Forest {
  std::vector<Tree> trees;

  double predict(std::span<const double> x) const;
};

// Per-feature range of grid cut indices still available inside a node's cell.
// The range is empty when lo > hi.
struct CutRange {
  int lo = 0;
  int hi = -1;
  int count() const { return hi >= lo ? hi - lo + 1 : 0; }
};

std::vector<CutRange> root_ranges(const SplitGrid& grid);

// Ranges for the cell of a given node, obtained by walking its ancestors.
std::vector<CutRange> node_ranges(const Tree& tree, int id, const SplitGrid& grid);

// Mass of s on axes with at least one available cut.
double admissible_mass(std::span<const CutRange> ranges, std::span<const double> s);

// Effective split probability of a node under the bounded-retry prior sampler.
double effective_split_prob(int depth, double admissible, const StructurePrior& prior);

// Log prior probability of the tree structure given s (leaf values excluded).
// Returns -inf for structures the prior cannot produce, e.g. a cut outside its cell.
double log_tree_prior(const Tree& tree, const SplitGrid& grid, std::span<const double> s,
                      const StructurePrior& prior);

// Prior contribution of the subtree rooted at id, given the cell ranges of id.
// `ranges` is restored before returning.
double log_subtree_prior(const Tree& tree, int id, std::vector<CutRange>& ranges,
                         std::span<const double> s, const StructurePrior& prior);

// Draws an axis from s restricted to axes with an available cut.
// Returns -1 if that set has zero mass.
int sample_admissible_axis(std::span<const CutRange> ranges, std::span<const double> s,
                           Rng& rng);

Tree sample_tree_from_prior(const PriorConfig& prior, const SplitGrid& grid,
                            std::span<const double> s, Rng& rng);

std::vector<double> sample_split_axis_probs(const SplitAxisPrior& prior, std::size_t p,
                                            Rng& rng);

// Flattened read-only forest for draw pools: children of a node are adjacent,
// leaves have feature == -1 and carry their value in `payload`.
class CompactForest {
 public:
  struct Node {
    std::int32_t feature;
    std::int32_t left;
    double payload;
  };

  CompactForest() = default;
  explicit CompactForest(const Forest& forest);

  double predict(std::span<const double> x) const;
  std::size_t num_trees() const { return roots_.size(); }
  std::size_t num_nodes() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  // Adds per-feature internal node counts into `counts`.
  void add_split_counts(std::vector<double>& counts) const;

  Forest expand() const;

  static CompactForest constant(std::size_t m, double value);

  bool operator==(const CompactForest& other) const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::int32_t> roots_;
};

// Line format, one record per line:
//   forest <num_trees>
//   tree <index> <num_nodes>
//   <id> <parent> <side> <kind> <feature> <threshold> <leaf_value>
// side is root|left|right, kind is split|leaf.  Unused numeric fields are
// written as -1 (feature) or 0.  Reals use %.17g so values round-trip.
void write_forest(std::ostream& out, const Forest& forest);
Forest read_forest(std::istream& in);

}  // namespace bandit_forest
