#pragma once

// (lambda, m) from the small-t behaviour of the prior volume
//   V(t) = Pr_prior[K(w) <= t] ~ C t^lambda (log 1/t)^{m-1},
// the Mellin-transform counterpart of the largest pole -lambda (order m) of
// zeta(z) = int K(w)^z phi(w) dw.
//
// V at a decreasing ladder of thresholds is estimated by multilevel
// splitting. The population at level k is distributed as the prior restricted
// to {K <= t_{k-1}}; the surviving fraction estimates V(t_k)/V(t_{k-1}). The
// survivors are resampled and moved by coordinate-wise slice sampling, whose
// shrinkage starts from the whole box so that thin level sets are reached
// without tuning a step size.

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rlctmix/domain.hpp"
#include "rlctmix/error.hpp"
#include "rlctmix/random.hpp"
#include "rlctmix/regression.hpp"

namespace rlctmix {

using LossFunction = std::function<double(std::span<const double>)>;

/// Prior on a box. Both callbacks are optional; the defaults are the uniform
/// density and uniform sampling.
struct BoxPrior {
  std::vector<double> lower;
  std::vector<double> upper;
  std::function<double(std::span<const double>)> log_density;
  std::function<void(Engine&, std::span<double>)> sampler;

  std::size_t dims() const noexcept { return lower.size(); }

  double log_pdf(std::span<const double> w) const { return log_density ? log_density(w) : 0.0; }

  void sample(Engine& rng, std::span<double> w) const {
    if (sampler) {
      sampler(rng, w);
      return;
    }
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = lower[j] + (upper[j] - lower[j]) * uniform01(rng);
  }
};

struct VolumeProblem {
  std::string name;
  LossFunction loss;
  BoxPrior prior;
};

struct VolumeScalingConfig {
  std::vector<double> thresholds;
  std::size_t samples_per_level = 20000;
  std::uint64_t seed = 1;
  /// Coordinate-wise slice sweeps applied after each resampling.
  std::size_t moves_per_level = 2;
  /// Levels with fit_min_t <= t <= fit_max_t enter the regression.
  double fit_max_t = 1e-4;
  double fit_min_t = 0.0;

  /// t_max, t_max r, t_max r^2, ... down to t_min.
  static std::vector<double> geometric(double t_max, double t_min, double ratio = 0.5) {
    if (!(t_max > t_min && t_min > 0.0 && ratio > 0.0 && ratio < 1.0))
      throw DomainError("geometric thresholds need t_max > t_min > 0 and 0 < ratio < 1");
    std::vector<double> out;
    for (double t = t_max; t >= t_min * (1.0 - 1e-12); t *= ratio) out.push_back(t);
    return out;
  }

  void validate() const {
    if (thresholds.empty()) throw DomainError("VolumeScalingConfig: no thresholds");
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      if (!(thresholds[k] > 0.0)) throw DomainError("VolumeScalingConfig: thresholds must be > 0");
      if (k > 0 && !(thresholds[k] < thresholds[k - 1]))
        throw DomainError("VolumeScalingConfig: thresholds must be strictly decreasing");
    }
    if (samples_per_level < 2) throw DomainError("VolumeScalingConfig: need at least 2 samples per level");
  }
};

struct VolumeLevel {
  double t = 0.0;
  double survival = 0.0;
  double log_volume = 0.0;
  /// Variance of log V under independent binomial level estimates.
  double log_volume_var = 0.0;
  /// Fraction of slice proposals accepted while moving this level.
  double move_acceptance = 0.0;
};

struct VolumeScalingResult {
  double lambda_hat = 0.0;
  int m_hat = 1;
  double stderr = 0.0;
  /// Per hypothesised m = 1, 2, 3.
  std::array<double, 3> lambda_by_m{};
  std::array<double, 3> rss_by_m{};
  std::size_t fit_levels = 0;
  std::vector<VolumeLevel> levels;
};

namespace detail {

/// One coordinate-wise slice sweep targeting prior * 1{K <= t}.
inline void slice_sweep(Engine& rng, const VolumeProblem& p, double t, std::vector<double>& w, double& loss,
                        std::size_t& accepted, std::size_t& proposed) {
  std::vector<double> trial(w);
  const double cur_lp = p.prior.log_pdf(w);
  double level = cur_lp;
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double y = level - (-std::log(uniform_open01(rng)));
    double lo = p.prior.lower[j], hi = p.prior.upper[j];
    trial = w;
    for (int attempt = 0; attempt < 200; ++attempt) {
      trial[j] = lo + (hi - lo) * uniform01(rng);
      ++proposed;
      const double lp = p.prior.log_pdf(trial);
      if (lp > y) {
        const double k = p.loss(trial);
        if (k <= t) {
          ++accepted;
          w[j] = trial[j];
          loss = k;
          level = lp;
          break;
        }
      }
      if (trial[j] < w[j]) lo = trial[j];
      else hi = trial[j];
    }
  }
}

}  // namespace detail

/// Multilevel-splitting estimate of V(t) and the (lambda, m) fit. The fit
/// regresses log V - (m-1) log log(1/t) on log t for m = 1, 2, 3 and keeps the
/// m with the smallest (weighted) residual sum of squares.
inline VolumeScalingResult volume_scaling_lambda(const VolumeProblem& problem, const VolumeScalingConfig& cfg) {
  cfg.validate();
  const std::size_t dims = problem.prior.dims();
  if (dims == 0 || problem.prior.upper.size() != dims) throw DimensionError("box prior bounds mismatch");
  const std::size_t N = cfg.samples_per_level;
  Engine rng(cfg.seed);

  std::vector<std::vector<double>> pop(N, std::vector<double>(dims));
  std::vector<double> loss(N);
  for (std::size_t i = 0; i < N; ++i) {
    problem.prior.sample(rng, pop[i]);
    loss[i] = problem.loss(pop[i]);
  }

  VolumeScalingResult r;
  double log_v = 0.0, var = 0.0;
  for (std::size_t k = 0; k < cfg.thresholds.size(); ++k) {
    const double t = cfg.thresholds[k];
    std::vector<std::size_t> alive;
    for (std::size_t i = 0; i < N; ++i)
      if (loss[i] <= t) alive.push_back(i);
    if (alive.empty())
      throw StarvationError("volume scaling: no survivors at level " + std::to_string(k) + " (t = " +
                                std::to_string(t) + ")",
                            k);
    const double p = static_cast<double>(alive.size()) / static_cast<double>(N);
    log_v += std::log(p);
    var += (1.0 - p) / (p * static_cast<double>(N));

    std::vector<std::vector<double>> next(N);
    std::vector<double> next_loss(N);
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t src = alive[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(alive.size()))];
      next[i] = pop[src];
      next_loss[i] = loss[src];
    }
    std::size_t accepted = 0, proposed = 0;
    if (k + 1 < cfg.thresholds.size())
      for (std::size_t i = 0; i < N; ++i)
        for (std::size_t s = 0; s < cfg.moves_per_level; ++s)
          detail::slice_sweep(rng, problem, t, next[i], next_loss[i], accepted, proposed);
    pop = std::move(next);
    loss = std::move(next_loss);
    r.levels.push_back({t, p, log_v, var, proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0});
  }

  std::vector<const VolumeLevel*> window;
  for (const auto& lv : r.levels)
    if (lv.t <= cfg.fit_max_t && lv.t >= cfg.fit_min_t && lv.t < 1.0) window.push_back(&lv);
  r.fit_levels = window.size();
  if (window.size() < 3) throw RankError("volume scaling: fewer than 3 levels inside the fit window");

  // Consecutive level estimates are independent given the population, so
  // the increments d_k = log V(t_k) - log V(t_{k-1}) are fitted instead of the
  // cumulative curve:  d_k = lambda dlog t_k + (m-1) dloglog(1/t_k),
  // weighted by the inverse binomial variance of each survival fraction.
  std::vector<double> dx, dl, dy, w;
  for (std::size_t k = 1; k < window.size(); ++k) {
    const auto* lo = window[k];
    const auto* hi = window[k - 1];
    dx.push_back(std::log(lo->t) - std::log(hi->t));
    dl.push_back(std::log(std::log(1.0 / lo->t)) - std::log(std::log(1.0 / hi->t)));
    dy.push_back(lo->log_volume - hi->log_volume);
    const double v = lo->log_volume_var - hi->log_volume_var;
    w.push_back(1.0 / std::max(v, 1e-12));
  }
  double sxx = 0.0;
  for (std::size_t k = 0; k < dx.size(); ++k) sxx += w[k] * dx[k] * dx[k];
  double best_rss = std::numeric_limits<double>::infinity();
  for (int m = 1; m <= 3; ++m) {
    double sxz = 0.0;
    for (std::size_t k = 0; k < dx.size(); ++k) sxz += w[k] * dx[k] * (dy[k] - (m - 1) * dl[k]);
    const double lam = sxz / sxx;
    double rss = 0.0;
    for (std::size_t k = 0; k < dx.size(); ++k) {
      const double e = dy[k] - (m - 1) * dl[k] - lam * dx[k];
      rss += w[k] * e * e;
    }
    r.lambda_by_m[m - 1] = lam;
    r.rss_by_m[m - 1] = rss;
    if (rss < best_rss) {
      best_rss = rss;
      r.m_hat = m;
      r.lambda_hat = lam;
    }
  }
  // Binomial error, inflated by the residual scale when the moves leave the
  // population correlated.
  const double dof = static_cast<double>(dx.size()) - 1.0;
  const double inflation = dof > 0 ? std::max(1.0, std::sqrt(best_rss / dof)) : 1.0;
  r.stderr = inflation / std::sqrt(sxx);
  return r;
}

// ---------------------------------------------------------------------------
// Built-in problems

/// K(w) = w^2 on the uniform prior over [0, 1]: lambda = 1/2, m = 1.
inline VolumeProblem toy_square_problem() {
  return {"square", [](std::span<const double> w) { return w[0] * w[0]; }, BoxPrior{{0.0}, {1.0}, {}, {}}};
}

/// K3(v) = sum delta_l^2 + a^2 sum beta_l^4 with v = (a, beta, delta) uniform
/// on [0,1] x [-1,1]^{2(L-1)}.
inline VolumeProblem k3_problem(int L) {
  if (L < 2) throw DomainError("k3_problem: L must be >= 2");
  const std::size_t k = static_cast<std::size_t>(L - 1);
  BoxPrior prior;
  prior.lower.assign(1 + 2 * k, -1.0);
  prior.upper.assign(1 + 2 * k, 1.0);
  prior.lower[0] = 0.0;
  auto loss = [k](std::span<const double> v) {
    const double a2 = v[0] * v[0];
    double s = 0.0;
    for (std::size_t l = 0; l < k; ++l) {
      const double b2 = v[1 + l] * v[1 + l];
      s += v[1 + k + l] * v[1 + k + l] + a2 * b2 * b2;
    }
    return s;
  };
  return {"K3_L" + std::to_string(L), loss, prior};
}

/// The full K(w) = KL(Mul(b*) || a Mul(b) + (1-a) Mul(c)) under uniform
/// priors on a, b, c. Coordinates are (a, stick fractions of b, of c) in the
/// unit cube; the log density carries the stick-breaking Jacobians.
inline VolumeProblem mixture_kl_problem(const SimplexVector& truth, int M) {
  const std::size_t L = truth.size();
  const Support support(static_cast<int>(L), M);
  std::vector<double> lq, q, coef;
  for (const auto& x : support) {
    lq.push_back(multinomial_log_pmf(truth, x));
    q.push_back(std::exp(lq.back()));
    coef.push_back(std::exp(log_multinomial_coefficient(x)));
  }
  auto sticks = [L](const double* u, double* p) {
    double rest = 1.0, log_jac = 0.0;
    for (std::size_t l = 0; l + 1 < L; ++l) {
      p[l] = rest * u[l];
      log_jac += std::log(std::max(rest, 1e-300));
      rest -= p[l];
    }
    p[L - 1] = std::max(rest, 0.0);
    return log_jac;
  };
  BoxPrior prior;
  prior.lower.assign(2 * L - 1, 0.0);
  prior.upper.assign(2 * L - 1, 1.0);
  prior.log_density = [sticks, L](std::span<const double> w) {
    std::vector<double> p(L);
    return sticks(w.data() + 1, p.data()) + sticks(w.data() + L, p.data());
  };
  prior.sampler = [L](Engine& rng, std::span<double> w) {
    w[0] = uniform01(rng);
    for (std::size_t c = 0; c < 2; ++c) {
      const auto p = dirichlet_draw(rng, std::vector<double>(L, 1.0));
      double rest = 1.0;
      for (std::size_t l = 0; l + 1 < L; ++l) {
        w[1 + c * (L - 1) + l] = rest > 0.0 ? std::clamp(p[l] / rest, 0.0, 1.0) : 0.0;
        rest -= p[l];
      }
    }
  };
  auto loss = [sticks, support, lq, q, coef, L](std::span<const double> w) {
    std::vector<double> b(L), c(L);
    sticks(w.data() + 1, b.data());
    sticks(w.data() + L, c.data());
    const double a = w[0];
    double k = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
      double pb = 1.0, pc = 1.0;
      for (std::size_t l = 0; l < L; ++l)
        for (int e = 0; e < support[i][l]; ++e) {
          pb *= b[l];
          pc *= c[l];
        }
      const double p = std::max(coef[i] * (a * pb + (1.0 - a) * pc), 1e-12);
      const double d = std::log(p) - lq[i];
      k += q[i] * (std::expm1(d) - d);
    }
    return k;
  };
  return {"mixture_kl", loss, prior};
}

}  // namespace rlctmix
