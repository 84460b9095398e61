#pragma once

// Seeding and the handful of draws the library needs. Everything takes an
// explicit engine; there is no global RNG state.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace rlctmix {

using Engine = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the `index`-th replicate/chain/block derived from `root`:
/// mix64(root + index). Disjoint indices give decorrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept {
  return mix64(root + index);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in (0, 1).
inline double uniform_open01(Engine& rng) {
  double u;
  do {
    u = uniform01(rng);
  } while (u == 0.0);
  return u;
}

inline double standard_normal(Engine& rng) {
  // Box-Muller, one output per call keeps the stream position simple.
  const double u1 = uniform_open01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Index drawn with probability proportional to `weights` (nonnegative, not all 0).
inline std::size_t categorical(Engine& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return last_positive;
}

/// Categorical draw from unnormalized log weights.
inline std::size_t categorical_log(Engine& rng, std::span<const double> log_weights) {
  double top = -INFINITY;
  for (double v : log_weights) top = std::max(top, v);
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i] - top);
  return categorical(rng, w);
}

inline double gamma_draw(Engine& rng, double shape) {
  std::gamma_distribution<double> g(shape, 1.0);
  return g(rng);
}

/// Dirichlet draw via normalized gammas. Falls back to the largest-shape
/// vertex if every gamma underflows (tiny concentrations).
inline std::vector<double> dirichlet_draw(Engine& rng, std::span<const double> concentration) {
  std::vector<double> out(concentration.size());
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = gamma_draw(rng, concentration[i]);
    total += out[i];
  }
  if (!(total > 0.0)) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.size(); ++i)
      if (concentration[i] > concentration[best]) best = i;
    for (auto& v : out) v = 0.0;
    out[best] = 1.0;
    return out;
  }
  for (auto& v : out) v /= total;
  return out;
}

}  // namespace rlctmix
