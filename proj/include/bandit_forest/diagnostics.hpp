#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bandit_forest/matrix.hpp"
#include "bandit_forest/mcmc.hpp"

namespace bandit_forest {

constexpr int kDefaultProbeCount = 40;

// Probe contexts for a scenario: uniform on [0, 1]^P from a stream keyed by
// (seed, scenario name) only, so every replication sees the same set.
Matrix make_probe_set(const std::string& scenario, std::uint64_t seed, int num_features,
                      int count = kDefaultProbeCount);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
  bool contains(double v) const { return lo <= v && v <= hi; }
};

// Nearest-rank quantiles at (1 - level) / 2 and 1 - (1 - level) / 2.
Interval credible_interval(std::span<const double> draws, double level = 0.95);

// Nominal levels used for calibration: 0.1, 0.2, ..., 0.9.
std::vector<double> ece_levels();

// One probe/arm credible interval at a nominal level, paired with the truth.
struct IntervalCell {
  int probe = 0;
  int arm = 0;
  double level = 0.95;
  Interval interval;
  double truth = 0.0;
};

// All cells recorded at one snapshot round.
struct IntervalSnapshot {
  long round = 0;
  std::vector<IntervalCell> cells;
};

// Builds cells for every probe, arm and level; draws[j][a] holds the posterior
// draws of arm a's mean at probe j and truth(j, a) the exact value.
IntervalSnapshot interval_snapshot(long round, const std::vector<std::vector<std::vector<double>>>& draws,
                                   const Matrix& truth, std::span<const double> levels);

struct CoverageLength {
  long round = 0;
  double coverage = 0.0;
  double mean_length = 0.0;
};

// Unweighted averages over the cells at `level`, one entry per snapshot.
std::vector<CoverageLength> coverage_and_length(std::span<const IntervalSnapshot> snapshots,
                                                double level = 0.95);

// mean over levels of |empirical coverage - level| using the cells of one snapshot.
double ece(const IntervalSnapshot& snapshot, std::span<const double> levels);

// Same construction straight from draws (one vector per probe-arm cell).
double ece_from_draws(const std::vector<std::vector<double>>& draws, std::span<const double> truth,
                      std::span<const double> levels);

// Gelman-Rubin potential scale reduction sqrt((W + B / n) / W).  Returns 1
// when every chain is constant and equal; W = 0 otherwise becomes 1e-12.
double r_hat(const std::vector<std::vector<double>>& chains);

struct RhatSummary {
  double median = 0.0;
  double mean = 0.0;
  std::size_t scalars = 0;
};

// R-hat over sigma^2 and the prediction at each probe, one trace per chain.
// Returns scalars = 0 when the pool has fewer than 2 chains or 4 draws each.
RhatSummary pool_r_hat(const DrawPool& pool, const Matrix& probes);
std::vector<double> pool_r_hat_values(const DrawPool& pool, const Matrix& probes);
RhatSummary summarize_r_hat(std::vector<double> values);

// Half L1 distance; throws if either input does not sum to 1.
double policy_delta_tv(std::span<const double> now, std::span<const double> prev);

// Mean over probes; rows of both matrices are distributions.
double mean_policy_delta_tv(const Matrix& now, const Matrix& prev);

// Share of split rules on each feature across every draw of every pool; uniform
// when there are no splits.
std::vector<double> feature_inclusion(std::span<const DrawPool> pools, std::size_t num_features);

// Cumulative mass after sorting inclusion probabilities in descending order.
std::vector<double> inclusion_frontier(std::span<const double> inclusion);

}  // namespace bandit_forest
