#pragma once

// Monte Carlo free energy for n beyond the enumeration cap.
//
// WBIC: the posterior mean of n L_n(w) at likelihood exponent 1/log n.
// Thermodynamic integration: F_n = int_0^1 E_tau[n L_n] dtau, evaluated by
// the trapezoid rule on a ladder of exponents.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rlctmix/exact_bayes.hpp"
#include "rlctmix/gibbs.hpp"

namespace rlctmix {

struct ChainSummary {
  double mean = 0.0;
  double standard_error = 0.0;
  double variance = 0.0;
  double rhat = 1.0;
};

inline ChainSummary summarize_chain(std::span<const double> xs) {
  ChainSummary s;
  if (xs.empty()) throw DomainError("summarize_chain: no samples");
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  s.standard_error = batch_means_se(xs);
  for (double x : xs) s.variance += (x - s.mean) * (x - s.mean);
  s.variance /= static_cast<double>(std::max<std::size_t>(xs.size(), 2) - 1);
  s.rhat = split_rhat(xs);
  return s;
}

inline FreeEnergyValue wbic_estimate(const Dataset& d, int H, const ConjugatePrior& prior, GibbsConfig cfg) {
  if (d.size() < 3) throw DomainError("wbic_estimate: n must be >= 3");
  cfg.temperature = 1.0 / std::log(static_cast<double>(d.size()));
  cfg.validate();
  // Always the tempered sampler; 1/log n is never exactly 1 for n >= 3.
  const auto samples = gibbs_posterior(d, H, prior, cfg);
  const auto s = summarize_chain(samples.energies);
  FreeEnergyValue out{s.mean, d.size(), FreeEnergyMethod::wbic};
  out.standard_error = s.standard_error;
  out.mixing_warning = !(s.rhat <= kRhatThreshold);
  return out;
}

/// tau_k = (k/K)^power, k = 0..K.
inline std::vector<double> power_ladder(std::size_t rungs, double power = 5.0) {
  if (rungs < 2) throw DomainError("power_ladder: need at least 2 rungs");
  std::vector<double> out(rungs);
  for (std::size_t k = 0; k < rungs; ++k)
    out[k] = std::pow(static_cast<double>(k) / static_cast<double>(rungs - 1), power);
  out.back() = 1.0;
  return out;
}

struct ThermoRung {
  double tau = 0.0;
  ChainSummary energy;
};

struct ThermoResult {
  FreeEnergyValue value;
  std::vector<ThermoRung> rungs;
  /// Set when the ladder is the two-point {0, 1}; the trapezoid is then
  /// (E_0 + E_1)/2, an upper bound with large bias.
  bool degenerate_ladder = false;
};

/// Trapezoid over the ladder. Rung 0 uses exact prior draws; each later rung
/// starts from the last state of the previous one. `cfg.burn_in` applies per
/// rung, `cfg.sweeps` is the per-rung chain length.
///
/// With `variance_correction` the end-point derivative term of the
/// Euler-Maclaurin expansion is added, using d/dtau E_tau[E] = -Var_tau[E]:
///   + sum_k h_k^2/12 (Var_{k+1} - Var_k).
inline ThermoResult thermo_integration_detailed(const Dataset& d, int H, const ConjugatePrior& prior,
                                                const std::vector<double>& ladder, GibbsConfig cfg,
                                                bool variance_correction = true) {
  cfg.validate();
  if (ladder.size() < 2 || ladder.front() != 0.0 || ladder.back() != 1.0)
    throw DomainError("thermo_integration: ladder must start at 0 and end at 1");
  for (std::size_t k = 1; k < ladder.size(); ++k)
    if (!(ladder[k] > ladder[k - 1])) throw DomainError("thermo_integration: ladder must be strictly increasing");

  TemperedSampler sampler(d, H, prior, cfg.seed);
  ThermoResult r;
  bool warn = false;
  for (double tau : ladder) {
    std::vector<double> energies;
    energies.reserve(cfg.sweeps);
    sampler.reset_counters();
    for (std::size_t sweep = 0; sweep < cfg.sweeps; ++sweep) {
      if (tau == 0.0) {
        sampler.draw_from_prior();
      } else {
        sampler.sweep(tau, sweep < cfg.burn_in);
      }
      if (tau != 0.0 && sweep < cfg.burn_in) continue;
      if ((sweep % cfg.thinning) == 0) energies.push_back(sampler.energy());
    }
    const auto s = summarize_chain(energies);
    // Exact prior draws are independent; the split-chain test only matters
    // for Markov rungs.
    if (tau != 0.0 && !(s.rhat <= kRhatThreshold)) warn = true;
    r.rungs.push_back({tau, s});
  }
  double value = 0.0, var = 0.0;
  for (std::size_t k = 0; k + 1 < r.rungs.size(); ++k) {
    const double h = ladder[k + 1] - ladder[k];
    value += 0.5 * h * (r.rungs[k].energy.mean + r.rungs[k + 1].energy.mean);
    if (variance_correction) value += h * h / 12.0 * (r.rungs[k + 1].energy.variance - r.rungs[k].energy.variance);
  }
  for (std::size_t k = 0; k < r.rungs.size(); ++k) {
    const double left = k > 0 ? ladder[k] - ladder[k - 1] : 0.0;
    const double right = k + 1 < ladder.size() ? ladder[k + 1] - ladder[k] : 0.0;
    const double w = 0.5 * (left + right);
    var += w * w * r.rungs[k].energy.standard_error * r.rungs[k].energy.standard_error;
  }
  r.value = {value, d.size(), FreeEnergyMethod::thermo, std::sqrt(var), warn};
  r.degenerate_ladder = ladder.size() == 2;
  return r;
}

inline FreeEnergyValue thermo_integration(const Dataset& d, int H, const ConjugatePrior& prior,
                                          const std::vector<double>& ladder, const GibbsConfig& cfg,
                                          bool variance_correction = true) {
  return thermo_integration_detailed(d, H, prior, ladder, cfg, variance_correction).value;
}

}  // namespace rlctmix
