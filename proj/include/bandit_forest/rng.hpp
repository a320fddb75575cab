#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace bandit_forest {

using Rng = std::mt19937_64;

// splitmix64 finalizer. Seed derivation goes through this function only, so
// derived streams do not depend on platform hash implementations.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Folds a path of indices into a base seed: h = splitmix64(h ^ splitmix64(k)).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

// 64-bit FNV-1a, used to turn names (scenario, agent label) into seed components.
std::uint64_t fnv1a(std::string_view text);
std::uint64_t fnv1a_bytes(const void* data, std::size_t size, std::uint64_t state);

double uniform01(Rng& rng);
double standard_normal(Rng& rng);
double sample_gamma(double shape, Rng& rng);

// Draw from InvGamma(shape, scale): scale / Gamma(shape, 1).
double sample_inv_gamma(double shape, double scale, Rng& rng);

// Dirichlet draw computed in log space, so small concentration parameters do
// not collapse the whole vector to zero.
std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng);

// Index drawn proportionally to non-negative weights. Zero-weight entries are
// never returned. Returns weights.size() if the total mass is zero.
std::size_t sample_categorical(std::span<const double> weights, Rng& rng);

std::size_t uniform_index(std::size_t n, Rng& rng);

template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
  // Fisher-Yates with our own index draw; std::shuffle's draw sequence is
  // implementation-defined.
  for (std::size_t i = values.size(); i > 1; --i) {
    std::size_t j = uniform_index(i, rng);
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace bandit_forest
