#include "bandit_forest/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bandit_forest {

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t k : path) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

std::uint64_t fnv1a_bytes(const void* data, std::size_t size, std::uint64_t state) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    state ^= bytes[i];
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::uint64_t fnv1a(std::string_view text) {
  return fnv1a_bytes(text.data(), text.size(), 0xcbf29ce484222325ULL);
}

double uniform01(Rng& rng) {
  // 53 random mantissa bits in [0, 1).
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double sample_gamma(double shape, Rng& rng) {
  std::gamma_distribution<double> dist(shape, 1.0);
  return dist(rng);
}

double sample_inv_gamma(double shape, double scale, Rng& rng) {
  double g = 0.0;
  while (g <= 0.0) g = sample_gamma(shape, rng);
  return scale / g;
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  std::vector<double> log_g(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double a = alpha[i];
    if (a >= 1.0) {
      log_g[i] = std::log(sample_gamma(a, rng));
    } else {
      // Gamma(a) = Gamma(a + 1) * U^(1/a)
      double u = 0.0;
      while (u <= 0.0) u = uniform01(rng);
      log_g[i] = std::log(sample_gamma(a + 1.0, rng)) + std::log(u) / a;
    }
  }
  const double top = *std::max_element(log_g.begin(), log_g.end());
  double total = 0.0;
  std::vector<double> out(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    out[i] = std::exp(log_g[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::size_t sample_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) return weights.size();
  const double target = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t last_positive = weights.size();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

std::size_t uniform_index(std::size_t n, Rng& rng) {
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t bound = n;
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t r = rng();
    if (r >= threshold) return static_cast<std::size_t>(r % bound);
  }
}

}  // namespace bandit_forest
