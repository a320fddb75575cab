#include "bandit_forest/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include <omp.h>

namespace bandit_forest {

int configure_threads_from_env() {
  if (const char* env = std::getenv("BANDIT_FOREST_THREADS")) {
    const int requested = std::atoi(env);
    if (requested > 0) omp_set_num_threads(requested);
  }
  return omp_get_max_threads();
}

std::vector<DrawPool> refresh_pools(std::span<const RefreshJob> jobs, const SamplerConfig& config,
                                    long refresh_round, ExecutionPolicy policy) {
  std::vector<RefreshInput> inputs;
  inputs.reserve(jobs.size());
  for (const RefreshJob& job : jobs) inputs.push_back(prepare_refresh(*job.X, job.y, config));

  const int chains = config.n_chains;
  const int tasks = static_cast<int>(jobs.size()) * chains;
  std::vector<ChainOutput> outputs(tasks);
  if (policy == ExecutionPolicy::Serial) {
    for (int t = 0; t < tasks; ++t) {
      const int job = t / chains;
      outputs[t] = run_chain(inputs[job], config, jobs[job].seed, refresh_round, t % chains);
    }
  } else {
#pragma omp parallel for schedule(dynamic, 1)
    for (int t = 0; t < tasks; ++t) {
      const int job = t / chains;
      outputs[t] = run_chain(inputs[job], config, jobs[job].seed, refresh_round, t % chains);
    }
  }

  std::vector<DrawPool> pools;
  pools.reserve(jobs.size());
  for (std::size_t job = 0; job < jobs.size(); ++job) {
    std::vector<ChainOutput> mine(std::make_move_iterator(outputs.begin() + job * chains),
                                  std::make_move_iterator(outputs.begin() + (job + 1) * chains));
    pools.push_back(assemble_pool(inputs[job], config, refresh_round, std::move(mine)));
  }
  return pools;
}

DrawPool run_refresh(const Matrix& X, std::span<const double> y, const SamplerConfig& config,
                     std::uint64_t seed, long refresh_round, ExecutionPolicy policy) {
  const RefreshJob job{&X, y, seed};
  return std::move(refresh_pools(std::span(&job, 1), config, refresh_round, policy).front());
}

Matrix predict_pool(const DrawPool& pool, const Matrix& points, ExecutionPolicy policy) {
  const auto n_draws = static_cast<long>(pool.size());
  Matrix out(pool.size(), points.rows());
  if (policy == ExecutionPolicy::Serial) {
    for (long d = 0; d < n_draws; ++d)
      for (std::size_t j = 0; j < points.rows(); ++j) out(d, j) = pool.predict_draw(d, points.row(j));
  } else {
#pragma omp parallel for schedule(static)
    for (long d = 0; d < n_draws; ++d)
      for (std::size_t j = 0; j < points.rows(); ++j) out(d, j) = pool.predict_draw(d, points.row(j));
  }
  return out;
}

double best_arm_value(const ArmPredictor& model, std::size_t draw, std::span<const double> x) {
  double best = model.predict(draw, 0, x);
  for (int a = 1; a < model.num_arms(); ++a) best = std::max(best, model.predict(draw, a, x));
  return best;
}

std::vector<double> fg_scores(const ArmPredictor& model, const Matrix& history, double b,
                              ExecutionPolicy policy) {
  const auto n_draws = static_cast<long>(model.num_draws());
  std::vector<double> scores(n_draws, 0.0);
  auto score_one = [&](long j) {
    double total = 0.0;
    for (std::size_t s = 0; s < history.rows(); ++s)
      total += std::min(b, best_arm_value(model, j, history.row(s)));
    scores[j] = total;
  };
  if (policy == ExecutionPolicy::Serial) {
    for (long j = 0; j < n_draws; ++j) score_one(j);
  } else {
#pragma omp parallel for schedule(static)
    for (long j = 0; j < n_draws; ++j) score_one(j);
  }
  return scores;
}

}  // namespace bandit_forest
