#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bandit_forest/forest.hpp"
#include "bandit_forest/matrix.hpp"
#include "bandit_forest/rng.hpp"

namespace bandit_forest {

// Affine map y -> (y - center) / (2 * half_range), sending [min, max] to [-0.5, 0.5].
struct RescaleMap {
  double center = 0.0;
  double half_range = 1.0;
  bool degenerate = false;

  double scale() const { return 2.0 * half_range; }
  double to_scaled(double y) const { return (y - center) / scale(); }
  double to_original(double v) const { return center + scale() * v; }
};

struct Rescaled {
  std::vector<double> values;
  RescaleMap map;
};

Rescaled rescale_response(std::span<const double> y);

// lambda such that P(sigma^2 < sigma_hat^2) = q for sigma^2 ~ nu * lambda / chi2_nu.
double calibrate_lambda_sigma(double sigma_hat, double nu, double q);

// log of the leaf marginal likelihood with the leaf mean integrated out.
double leaf_marginal_loglik(double n, double S, double SS, double sigma2, double sigma_mu2);

struct GaussianMoments {
  double mean = 0.0;
  double variance = 0.0;
};

GaussianMoments leaf_posterior(double n, double S, double sigma2, double sigma_mu2);
double gibbs_leaf_draw(double n, double S, double sigma2, double sigma_mu2, Rng& rng);
double gibbs_sigma_update(double n, double sse, double nu, double lambda_sigma, Rng& rng);

// Conjugate draw s ~ Dir(zeta / p^xi + counts).
std::vector<double> gibbs_split_axis_update(std::span<const double> counts, double zeta,
                                            double xi, Rng& rng);

std::vector<double> split_counts(const Forest& forest, std::size_t p);

struct Proposal {
  MoveKind kind = MoveKind::Grow;
  bool feasible = false;
  Tree tree;
  // Root of the edited subtree; the id is shared by the current and proposed tree.
  int node = -1;
  double log_transition_ratio = 0.0;  // log q(T | T') - log q(T' | T)
  double log_prior_ratio = 0.0;
};

std::vector<int> growable_leaves(const Tree& tree, const SplitGrid& grid,
                                 std::span<const double> s);

Proposal make_grow(const Tree& tree, int leaf, int feature, int cut, const SplitGrid& grid,
                   std::span<const double> s, const PriorConfig& prior);
Proposal make_prune(const Tree& tree, int node, const SplitGrid& grid,
                    std::span<const double> s, const PriorConfig& prior);
Proposal make_change(const Tree& tree, int node, int feature, int cut, const SplitGrid& grid,
                     std::span<const double> s, const PriorConfig& prior);
Proposal make_swap(const Tree& tree, int parent, int child, const SplitGrid& grid,
                   std::span<const double> s, const PriorConfig& prior);

Proposal propose_move(const Tree& tree, MoveKind kind, const SplitGrid& grid,
                      std::span<const double> s, const PriorConfig& prior, Rng& rng);
Proposal propose_structure(const Tree& tree, const SplitGrid& grid, std::span<const double> s,
                           const PriorConfig& prior, Rng& rng);

struct MoveCounters {
  std::array<std::int64_t, kNumMoveKinds> attempted{};
  std::array<std::int64_t, kNumMoveKinds> accepted{};

  void record(MoveKind kind, bool accept);
  std::int64_t total_attempted() const;
  std::int64_t total_accepted() const;
  double rate(MoveKind kind) const;
  double overall_rate() const;
  MoveCounters& operator+=(const MoveCounters& other);
};

struct SamplerConfig {
  int n_burn = 500;
  int n_post = 500;
  int n_chains = 4;
  PriorConfig prior;
  // Holds sigma^2 fixed (original response units) and skips its Gibbs step.
  std::optional<double> fixed_sigma2;
  // Structure proposals leaving a new leaf with fewer rows are rejected.
  int min_leaf_size = 1;
  // When false only leaves, sigma^2 and s are updated.
  bool update_structure = true;

  void validate() const;
};

struct Draw {
  CompactForest forest;  // rescaled response units
  double sigma2 = 0.0;   // original response units
  std::vector<double> s;
  int chain = 0;
};

struct DrawPool {
  std::vector<Draw> draws;  // chain-major: chain c owns [c * n_post, (c + 1) * n_post)
  RescaleMap rescale;
  long refresh_round = 0;
  int n_chains = 0;
  int n_post = 0;
  MoveCounters counters;
  std::vector<MoveCounters> chain_counters;

  std::size_t size() const { return draws.size(); }
  double predict_draw(std::size_t index, std::span<const double> x) const {
    return rescale.to_original(draws[index].forest.predict(x));
  }
};

std::vector<double> posterior_predict(const DrawPool& pool, std::span<const double> x);

// One Metropolis-within-Gibbs chain on a single regression dataset, working on
// the rescaled response.  X and grid must outlive the chain.
class Chain {
 public:
  Chain(const Matrix& X, std::span<const double> y_scaled, const SplitGrid& grid,
        const SamplerConfig& config, double lambda_sigma, std::optional<double> fixed_sigma2,
        std::uint64_t seed);

  // Cold start: s, sigma^2 and m trees drawn from the prior.
  void initialize_from_prior();
  void set_state(Forest forest, double sigma2, std::vector<double> s);

  void sweep();
  bool mh_step(int tree_index);

  const Forest& forest() const { return forest_; }
  double sigma2() const { return sigma2_; }
  const std::vector<double>& s() const { return s_; }
  const MoveCounters& counters() const { return counters_; }
  const std::vector<double>& residuals() const { return residual_; }
  double lambda_sigma() const { return lambda_sigma_; }

  // Max |cached residual - (y - forest prediction)| over rows.
  double residual_drift() const;
  bool leaf_cache_consistent() const;

 private:
  int route_binned(const Tree& tree, int start, std::size_t row) const;
  void rebuild_caches();
  void update_split_axis();
  double reduced_loglik(double n, double S) const;

  const Matrix& X_;
  std::vector<double> y_;
  const SplitGrid& grid_;
  const SamplerConfig& config_;
  double lambda_sigma_;
  std::optional<double> fixed_sigma2_;
  double sigma_mu2_;
  Rng rng_;

  std::size_t n_;
  std::size_t p_;
  std::vector<std::uint16_t> bins_;  // column-major, bins_[v * n + i]

  Forest forest_;
  double sigma2_ = 1.0;
  std::vector<double> s_;
  std::vector<std::vector<std::int32_t>> leaf_of_row_;
  std::vector<double> residual_;
  MoveCounters counters_;

  // Scratch buffers reused across steps.
  std::vector<double> partial_;
  std::vector<std::int32_t> new_leaf_;
  std::vector<double> old_n_, old_sum_, new_n_, new_sum_;
  std::vector<char> in_subtree_, is_new_leaf_;
  std::vector<int> stack_, new_leaves_, old_leaves_;
};

// Everything a refresh needs before chains start: scaled response, grid, lambda.
struct RefreshInput {
  const Matrix* X = nullptr;
  Rescaled rescaled;
  SplitGrid grid;
  double lambda_sigma = 1.0;
  std::optional<double> fixed_sigma2_scaled;
};

RefreshInput prepare_refresh(const Matrix& X, std::span<const double> y,
                             const SamplerConfig& config);

struct ChainOutput {
  std::vector<Draw> draws;
  MoveCounters counters;
};

// Runs one full chain (or the degenerate shortcut) for chain index `chain`.
ChainOutput run_chain(const RefreshInput& input, const SamplerConfig& config,
                      std::uint64_t seed, long refresh_round, int chain);

DrawPool assemble_pool(const RefreshInput& input, const SamplerConfig& config,
                       long refresh_round, std::vector<ChainOutput> outputs);

std::uint64_t chain_seed(std::uint64_t seed, long refresh_round, int chain);

}  // namespace bandit_forest
