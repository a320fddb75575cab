// Serial reference vs OpenMP kernels on fixed synthetic inputs.

#include <benchmark/benchmark.h>

#include "bandit_forest/environments.hpp"
#include "bandit_forest/kernels.hpp"

namespace bf = bandit_forest;

namespace {

struct Inputs {
  std::vector<bf::Matrix> X;
  std::vector<std::vector<double>> y;
  bf::Matrix points;
  bf::SamplerConfig config;

  Inputs() {
    bf::Rng rng(1);
    bf::SyntheticEnv env(bf::scenario_by_name("friedman"), rng);
    for (int arm = 0; arm < 2; ++arm) {
      const auto s = env.materialize(500, rng);
      X.push_back(s.contexts);
      std::vector<double> r(500);
      for (std::size_t i = 0; i < 500; ++i) r[i] = s.rewards(i, arm);
      y.push_back(r);
    }
    points = env.materialize(200, rng).contexts;
    config.prior.m = 50;
    config.n_burn = 50;
    config.n_post = 50;
    config.n_chains = 4;
  }

  std::vector<bf::RefreshJob> jobs() const {
    return {{&X[0], y[0], 11}, {&X[1], y[1], 12}};
  }
};

const Inputs& inputs() {
  static const Inputs in;
  return in;
}

bf::ExecutionPolicy policy_of(const benchmark::State& state) {
  return state.range(0) ? bf::ExecutionPolicy::Parallel : bf::ExecutionPolicy::Serial;
}

class PoolPredictor : public bf::ArmPredictor {
 public:
  explicit PoolPredictor(const std::vector<bf::DrawPool>& pools) : pools_(pools) {}
  std::size_t num_draws() const override { return pools_[0].size(); }
  int num_arms() const override { return int(pools_.size()); }
  double predict(std::size_t d, int a, std::span<const double> x) const override {
    return pools_[a].predict_draw(d, x);
  }

 private:
  const std::vector<bf::DrawPool>& pools_;
};

const std::vector<bf::DrawPool>& pools() {
  static const auto p = bf::refresh_pools(inputs().jobs(), inputs().config, 1, bf::ExecutionPolicy::Parallel);
  return p;
}

void BM_RefreshPools(benchmark::State& state) {
  const auto jobs = inputs().jobs();
  for (auto _ : state) benchmark::DoNotOptimize(bf::refresh_pools(jobs, inputs().config, 1, policy_of(state)));
}

void BM_PredictPool(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(bf::predict_pool(pools()[0], inputs().points, policy_of(state)));
}

void BM_FgScores(benchmark::State& state) {
  const PoolPredictor model(pools());
  for (auto _ : state) benchmark::DoNotOptimize(bf::fg_scores(model, inputs().points, 1.0, policy_of(state)));
}

}  // namespace

// Argument 0 runs the serial reference, 1 the OpenMP kernel.
BENCHMARK(BM_RefreshPools)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictPool)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FgScores)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  bf::configure_threads_from_env();
  benchmark::Initialize(&argc, argv);
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
