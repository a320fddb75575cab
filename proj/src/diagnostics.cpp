#include "bandit_forest/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bandit_forest/rng.hpp"

namespace bandit_forest {

Matrix make_probe_set(const std::string& scenario, std::uint64_t seed, int num_features, int count) {
  Rng rng(derive_seed(seed, {0x9b0be, fnv1a(scenario)}));
  Matrix probes(count, num_features);
  for (int j = 0; j < count; ++j)
    for (int v = 0; v < num_features; ++v) probes(j, v) = uniform01(rng);
  return probes;
}

namespace {

double nearest_rank(const std::vector<double>& sorted, double prob) {
  const double n = double(sorted.size());
  // Guard against p * n landing a hair above an integer.
  long rank = static_cast<long>(std::ceil(prob * n - 1e-9));
  rank = std::clamp(rank, 1L, static_cast<long>(sorted.size()));
  return sorted[rank - 1];
}

}  // namespace

Interval credible_interval(std::span<const double> draws, double level) {
  if (draws.size() < 2) throw std::invalid_argument("credible_interval needs at least 2 draws");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  const double tail = (1.0 - level) / 2.0;
  return {nearest_rank(sorted, tail), nearest_rank(sorted, 1.0 - tail)};
}

std::vector<double> ece_levels() {
  std::vector<double> levels;
  for (int k = 1; k <= 9; ++k) levels.push_back(k / 10.0);
  return levels;
}

IntervalSnapshot interval_snapshot(long round, const std::vector<std::vector<std::vector<double>>>& draws,
                                   const Matrix& truth, std::span<const double> levels) {
  IntervalSnapshot snap;
  snap.round = round;
  for (std::size_t j = 0; j < draws.size(); ++j) {
    for (std::size_t a = 0; a < draws[j].size(); ++a) {
      std::vector<double> sorted = draws[j][a];
      if (sorted.size() < 2) throw std::invalid_argument("interval_snapshot needs at least 2 draws");
      std::sort(sorted.begin(), sorted.end());
      for (double level : levels) {
        const double tail = (1.0 - level) / 2.0;
        IntervalCell cell;
        cell.probe = static_cast<int>(j);
        cell.arm = static_cast<int>(a);
        cell.level = level;
        cell.interval = {nearest_rank(sorted, tail), nearest_rank(sorted, 1.0 - tail)};
        cell.truth = truth(j, a);
        snap.cells.push_back(cell);
      }
    }
  }
  return snap;
}

namespace {

bool same_level(double a, double b) { return std::abs(a - b) < 1e-9; }

}  // namespace

std::vector<CoverageLength> coverage_and_length(std::span<const IntervalSnapshot> snapshots, double level) {
  std::vector<CoverageLength> out;
  for (const auto& snap : snapshots) {
    double hits = 0.0, length = 0.0;
    std::size_t n = 0;
    for (const auto& cell : snap.cells) {
      if (!same_level(cell.level, level)) continue;
      hits += cell.interval.contains(cell.truth);
      length += cell.interval.length();
      ++n;
    }
    CoverageLength row;
    row.round = snap.round;
    row.coverage = n ? hits / double(n) : std::nan("");
    row.mean_length = n ? length / double(n) : std::nan("");
    out.push_back(row);
  }
  return out;
}

double ece(const IntervalSnapshot& snapshot, std::span<const double> levels) {
  if (levels.empty()) throw std::invalid_argument("ece needs at least one level");
  double total = 0.0;
  for (double level : levels) {
    double hits = 0.0;
    std::size_t n = 0;
    for (const auto& cell : snapshot.cells) {
      if (!same_level(cell.level, level)) continue;
      hits += cell.interval.contains(cell.truth);
      ++n;
    }
    if (n == 0) throw std::invalid_argument("snapshot has no cells at a requested level");
    total += std::abs(hits / double(n) - level);
  }
  return total / double(levels.size());
}

double ece_from_draws(const std::vector<std::vector<double>>& draws, std::span<const double> truth,
                      std::span<const double> levels) {
  if (draws.size() != truth.size()) throw std::invalid_argument("ece_from_draws: size mismatch");
  IntervalSnapshot snap;
  Matrix t(truth.size(), 1);
  std::vector<std::vector<std::vector<double>>> cells(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    cells[i].push_back(draws[i]);
    t(i, 0) = truth[i];
  }
  return ece(interval_snapshot(0, cells, t, levels), levels);
}

double r_hat(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) throw std::invalid_argument("r_hat needs at least 2 chains");
  const std::size_t n = chains[0].size();
  if (n < 4) throw std::invalid_argument("r_hat needs chains of length at least 4");
  for (const auto& c : chains)
    if (c.size() != n) throw std::invalid_argument("r_hat chains must have equal length");

  std::vector<double> means(m);
  double grand = 0.0, W = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    double s = 0.0;
    for (double v : chains[c]) s += v;
    means[c] = s / double(n);
    grand += means[c];
    double ss = 0.0;
    for (double v : chains[c]) ss += (v - means[c]) * (v - means[c]);
    W += ss / double(n - 1);
  }
  grand /= double(m);
  W /= double(m);
  double B = 0.0;
  for (double mu : means) B += (mu - grand) * (mu - grand);
  B *= double(n) / double(m - 1);
  if (W == 0.0 && B == 0.0) return 1.0;
  const double denom = W > 0.0 ? W : W + 1e-12;
  return std::sqrt((W + B / double(n)) / denom);
}

RhatSummary summarize_r_hat(std::vector<double> values) {
  RhatSummary out;
  out.scalars = values.size();
  if (values.empty()) {
    out.median = out.mean = std::nan("");
    return out;
  }
  std::sort(values.begin(), values.end());
  const std::size_t k = values.size();
  out.median = k % 2 ? values[k / 2] : 0.5 * (values[k / 2 - 1] + values[k / 2]);
  double s = 0.0;
  for (double v : values) s += v;
  out.mean = s / double(k);
  return out;
}

RhatSummary pool_r_hat(const DrawPool& pool, const Matrix& probes) {
  return summarize_r_hat(pool_r_hat_values(pool, probes));
}

std::vector<double> pool_r_hat_values(const DrawPool& pool, const Matrix& probes) {
  if (pool.n_chains < 2 || pool.n_post < 4) return {};
  const std::size_t m = pool.n_chains, n = pool.n_post;
  std::vector<double> values;
  std::vector<std::vector<double>> chains(m, std::vector<double>(n));
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t i = 0; i < n; ++i) chains[c][i] = pool.draws[c * n + i].sigma2;
  values.push_back(r_hat(chains));
  for (std::size_t j = 0; j < probes.rows(); ++j) {
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t i = 0; i < n; ++i) chains[c][i] = pool.predict_draw(c * n + i, probes.row(j));
    values.push_back(r_hat(chains));
  }
  return values;
}

namespace {

void check_distribution(std::span<const double> p) {
  double total = 0.0;
  for (double v : p) {
    if (v < 0.0) throw std::invalid_argument("policy distribution has a negative entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("policy distribution does not sum to 1");
}

}  // namespace

double policy_delta_tv(std::span<const double> now, std::span<const double> prev) {
  if (now.size() != prev.size()) throw std::invalid_argument("policy_delta_tv: size mismatch");
  check_distribution(now);
  check_distribution(prev);
  double d = 0.0;
  for (std::size_t a = 0; a < now.size(); ++a) d += std::abs(now[a] - prev[a]);
  return 0.5 * d;
}

double mean_policy_delta_tv(const Matrix& now, const Matrix& prev) {
  if (now.rows() != prev.rows() || now.rows() == 0)
    throw std::invalid_argument("mean_policy_delta_tv: probe count mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < now.rows(); ++j) total += policy_delta_tv(now.row(j), prev.row(j));
  return total / double(now.rows());
}

std::vector<double> feature_inclusion(std::span<const DrawPool> pools, std::size_t num_features) {
  if (num_features == 0) throw std::invalid_argument("feature_inclusion needs at least one feature");
  std::vector<double> counts(num_features, 0.0);
  for (const auto& pool : pools)
    for (const auto& draw : pool.draws) draw.forest.add_split_counts(counts);
  double total = 0.0;
  for (double c : counts) total += c;
  if (total == 0.0) return std::vector<double>(num_features, 1.0 / double(num_features));
  for (double& c : counts) c /= total;
  return counts;
}

std::vector<double> inclusion_frontier(std::span<const double> inclusion) {
  std::vector<double> sorted(inclusion.begin(), inclusion.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  for (std::size_t i = 1; i < sorted.size(); ++i) sorted[i] += sorted[i - 1];
  return sorted;
}

}  // namespace bandit_forest
