#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bandit_forest/matrix.hpp"
#include "bandit_forest/mcmc.hpp"

namespace bandit_forest {

// Each data-parallel kernel has a plain serial loop kept as the reference and
// an OpenMP version.  Both produce bit-identical results because every task
// owns its RNG stream and writes to its own output slot.
enum class ExecutionPolicy { Serial, Parallel };

// Applies BANDIT_FOREST_THREADS (if set) to the OpenMP runtime and returns the
// resulting thread cap.
int configure_threads_from_env();

// One arm's data for a multi-arm refresh.
struct RefreshJob {
  const Matrix* X = nullptr;
  std::span<const double> y;
  std::uint64_t seed = 0;
};

// Runs n_chains chains for every job, flattening (job, chain) into one task list.
std::vector<DrawPool> refresh_pools(std::span<const RefreshJob> jobs, const SamplerConfig& config,
                                    long refresh_round, ExecutionPolicy policy);

DrawPool run_refresh(const Matrix& X, std::span<const double> y, const SamplerConfig& config,
                     std::uint64_t seed, long refresh_round,
                     ExecutionPolicy policy = ExecutionPolicy::Parallel);

// Predictions of every draw at every point, original response scale.
// Result is draws x points.
Matrix predict_pool(const DrawPool& pool, const Matrix& points, ExecutionPolicy policy);

// Read-only view of a K-arm posterior: draw j's prediction for arm a at x.
class ArmPredictor {
 public:
  virtual ~ArmPredictor() = default;
  virtual std::size_t num_draws() const = 0;
  virtual int num_arms() const = 0;
  virtual double predict(std::size_t draw, int arm, std::span<const double> x) const = 0;
};

// Best-arm value of one draw at x, the f* of the optimism score.
double best_arm_value(const ArmPredictor& model, std::size_t draw, std::span<const double> x);

// S_j = sum over history rows of min(b, max_a f_j(x, a)).
std::vector<double> fg_scores(const ArmPredictor& model, const Matrix& history, double b,
                              ExecutionPolicy policy);

}  // namespace bandit_forest
