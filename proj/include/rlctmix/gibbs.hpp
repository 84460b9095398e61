#pragma once

// Posterior samplers for H-component multinomial mixtures under the
// conjugate Dirichlet prior.
//
// At temperature 1 the latent assignments are sampled collapsed:
//   P(z_i = h | z_-i) ∝ (alpha_h + n_h) DirMult(x_i | beta_h + s_h)
// followed by parameter draws a ~ Dir(alpha + n), b_h ~ Dir(beta_h + s_h).
//
// A tempered posterior phi(w) prod_i p(X_i|w)^tau has no latent conjugacy,
// so it is sampled by block random-walk Metropolis on additive log-ratio
// coordinates (one block for a, one per b_h). In those coordinates the
// Dirichlet prior times the Jacobian is prod_k p_k^{beta_k}.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "rlctmix/domain.hpp"
#include "rlctmix/error.hpp"
#include "rlctmix/exact_bayes.hpp"
#include "rlctmix/numeric.hpp"
#include "rlctmix/random.hpp"

namespace rlctmix {

struct GibbsConfig {
  std::size_t sweeps = 20000;
  std::size_t burn_in = 2000;
  std::size_t thinning = 1;
  std::uint64_t seed = 1;
  /// Exponent tau on the likelihood.
  double temperature = 1.0;

  void validate() const {
    if (sweeps <= burn_in) throw DomainError("GibbsConfig: sweeps must exceed burn_in");
    if (thinning < 1) throw DomainError("GibbsConfig: thinning must be >= 1");
    if (!(temperature >= 0.0) || !std::isfinite(temperature))
      throw DomainError("GibbsConfig: temperature must be finite and >= 0");
  }
};

/// Component probabilities below this are clamped inside log-likelihoods.
inline constexpr double kProbabilityFloor = 1e-12;

struct GibbsSamples {
  /// One latent assignment per retained sweep (temperature 1 only).
  std::vector<std::vector<int>> assignments;
  std::vector<MixtureParams> params;
  /// n L_n(w) = -sum_i log p(X_i | w) at each retained parameter draw.
  std::vector<double> energies;
  /// Metropolis acceptance rate per block (tempered sampler only).
  std::vector<double> acceptance;
};

// ---------------------------------------------------------------------------
// Chain diagnostics

/// Batch-means standard error of the mean, with floor(sqrt(N)) sized batches.
inline double batch_means_se(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) return std::numeric_limits<double>::infinity();
  const std::size_t size = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  const std::size_t batches = n / size;
  if (batches < 2) return std::numeric_limits<double>::infinity();
  std::vector<double> means(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < size; ++i) means[b] += xs[b * size + i];
    means[b] /= static_cast<double>(size);
  }
  const double m = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(batches);
  double v = 0.0;
  for (double x : means) v += (x - m) * (x - m);
  v /= static_cast<double>(batches - 1);
  return std::sqrt(v / static_cast<double>(batches));
}

/// Gelman-Rubin R-hat of a single chain split into two halves.
inline double split_rhat(std::span<const double> xs) {
  const std::size_t half = xs.size() / 2;
  if (half < 2) return std::numeric_limits<double>::infinity();
  double mean[2] = {0, 0}, var[2] = {0, 0};
  for (int c = 0; c < 2; ++c) {
    const auto part = xs.subspan(c * half, half);
    mean[c] = std::accumulate(part.begin(), part.end(), 0.0) / static_cast<double>(half);
    for (double x : part) var[c] += (x - mean[c]) * (x - mean[c]);
    var[c] /= static_cast<double>(half - 1);
  }
  const double w = 0.5 * (var[0] + var[1]);
  const double grand = 0.5 * (mean[0] + mean[1]);
  const double b = static_cast<double>(half) *
                   ((mean[0] - grand) * (mean[0] - grand) + (mean[1] - grand) * (mean[1] - grand));
  if (w == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double hn = static_cast<double>(half);
  const double var_plus = (hn - 1.0) / hn * w + b / hn;
  return std::sqrt(var_plus / w);
}

inline constexpr double kRhatThreshold = 1.1;

// ---------------------------------------------------------------------------
// Likelihood over the distinct observations

namespace detail {

struct DistinctData {
  std::vector<CountVector> points;
  std::vector<double> counts;
  std::vector<double> log_coefs;
  std::size_t n = 0;

  explicit DistinctData(const Dataset& d) : n(d.size()) {
    for (const auto& x : d.observations) {
      auto it = std::find(points.begin(), points.end(), x);
      if (it == points.end()) {
        points.push_back(x);
        counts.push_back(1.0);
        log_coefs.push_back(log_multinomial_coefficient(x));
      } else {
        counts[static_cast<std::size_t>(it - points.begin())] += 1.0;
      }
    }
  }
};

/// log Mul(x | b) with every b_l floored at kProbabilityFloor.
inline double clamped_log_pmf(const std::vector<double>& log_b, const CountVector& x, double log_coef) {
  double v = log_coef;
  for (std::size_t l = 0; l < log_b.size(); ++l)
    if (x[l] > 0) v += x[l] * log_b[l];
  return v;
}

inline std::vector<double> clamped_logs(const std::vector<double>& p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::log(std::max(p[i], kProbabilityFloor));
  return out;
}

/// Additive log-ratio coordinates z_k = log(p_k/p_K), k < K.
inline std::vector<double> to_alr(const std::vector<double>& p) {
  const auto lp = clamped_logs(p);
  std::vector<double> z(p.size() - 1);
  for (std::size_t k = 0; k + 1 < p.size(); ++k) z[k] = lp[k] - lp.back();
  return z;
}

inline std::vector<double> from_alr(const std::vector<double>& z) {
  double top = 0.0;
  for (double v : z) top = std::max(top, v);
  std::vector<double> p(z.size() + 1);
  double total = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) total += (p[k] = std::exp(z[k] - top));
  total += (p.back() = std::exp(-top));
  for (double& v : p) v /= total;
  return p;
}

inline MixtureParams make_params(const std::vector<double>& a, const std::vector<std::vector<double>>& b) {
  auto fix = [](std::vector<double> p) {
    // Renormalize away rounding from the log-ratio map.
    const double t = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= t;
    return p;
  };
  std::vector<SimplexVector> comps;
  for (const auto& row : b) comps.emplace_back(fix(row));
  return MixtureParams(fix(a), std::move(comps));
}

inline double negative_log_likelihood(const MixtureParams& w, const DistinctData& dd) {
  double total = 0.0;
  std::vector<double> terms(w.components_count());
  for (std::size_t j = 0; j < dd.points.size(); ++j) {
    for (std::size_t h = 0; h < w.components_count(); ++h)
      terms[h] = std::log(std::max(w.weight(h), kProbabilityFloor)) +
                 detail::clamped_log_pmf(detail::clamped_logs(w.component(h).probs()), dd.points[j],
                                         dd.log_coefs[j]);
    total -= dd.counts[j] * log_sum_exp(terms);
  }
  return total;
}
}  // namespace detail

/// n L_n(w) = -sum_i log p(X_i | w), with the probability floor applied.
inline double negative_log_likelihood(const MixtureParams& w, const Dataset& d) {
  return detail::negative_log_likelihood(w, detail::DistinctData(d));
}

/// Block random-walk Metropolis for the tempered posterior. Step sizes adapt
/// during burn-in toward 30% acceptance and are frozen afterwards.
class TemperedSampler {
 public:
  TemperedSampler(const Dataset& d, int H, const ConjugatePrior& prior, std::uint64_t seed)
      : data_(d), prior_(prior), H_(H), L_(d.L), rng_(seed) {
    d.validate();
    prior.validate();
    if (prior.H() != H || prior.L() != d.L) throw DimensionError("prior and dataset dimensions disagree");
    draw_from_prior();
    log_step_.assign(static_cast<std::size_t>(H_) + 1, std::log(0.5));
    accepted_.assign(log_step_.size(), 0);
    proposed_.assign(log_step_.size(), 0);
  }

  /// Exact prior draw (used directly at tau = 0).
  void draw_from_prior() {
    a_ = dirichlet_draw(rng_, prior_.alpha);
    b_.clear();
    for (int h = 0; h < H_; ++h) b_.push_back(dirichlet_draw(rng_, prior_.beta[h]));
    refresh_all();
  }

  void set_state(const MixtureParams& w) {
    a_ = w.weights();
    b_.clear();
    for (const auto& c : w.components()) b_.push_back(c.probs());
    refresh_all();
  }

  /// One sweep over the H+1 blocks at exponent tau.
  void sweep(double tau, bool adapt) {
    ++iteration_;
    const double gain = adapt ? 1.0 / std::pow(static_cast<double>(iteration_) + 10.0, 0.6) : 0.0;
    for (std::size_t blk = 0; blk <= static_cast<std::size_t>(H_); ++blk) {
      const bool mixing = blk == 0;
      const auto& cur = mixing ? a_ : b_[blk - 1];
      const auto& conc = mixing ? prior_.alpha : prior_.beta[blk - 1];
      auto z = detail::to_alr(cur);
      const double scale = std::exp(log_step_[blk]);
      for (double& v : z) v += scale * standard_normal(rng_);
      auto prop = detail::from_alr(z);

      auto saved_a = a_;
      auto saved_row = mixing ? std::vector<double>{} : b_[blk - 1];
      auto saved_comp = comp_log_;
      const double old_ll = loglik_;
      const double old_prior = log_prior_block(cur, conc);
      if (mixing) {
        a_ = prop;
      } else {
        b_[blk - 1] = prop;
        refresh_component(blk - 1);
      }
      refresh_loglik();
      const double log_ratio = log_prior_block(prop, conc) - old_prior + tau * (loglik_ - old_ll);
      ++proposed_[blk];
      const bool accept = std::log(uniform_open01(rng_)) < log_ratio;
      if (accept) {
        ++accepted_[blk];
      } else {
        a_ = std::move(saved_a);
        if (!mixing) b_[blk - 1] = std::move(saved_row);
        comp_log_ = std::move(saved_comp);
        loglik_ = old_ll;
      }
      if (adapt) log_step_[blk] += gain * ((accept ? 1.0 : 0.0) - 0.3);
    }
  }

  double energy() const { return -loglik_; }
  MixtureParams params() const { return detail::make_params(a_, b_); }
  std::vector<double> acceptance() const {
    std::vector<double> out(accepted_.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = proposed_[i] ? static_cast<double>(accepted_[i]) / static_cast<double>(proposed_[i]) : 0.0;
    return out;
  }
  void reset_counters() {
    std::fill(accepted_.begin(), accepted_.end(), 0);
    std::fill(proposed_.begin(), proposed_.end(), 0);
  }
  Engine& rng() { return rng_; }

 private:
  static double log_prior_block(const std::vector<double>& p, const std::vector<double>& conc) {
    double v = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) v += conc[k] * std::log(std::max(p[k], kProbabilityFloor));
    return v;
  }

  void refresh_component(std::size_t h) {
    const auto lb = detail::clamped_logs(b_[h]);
    for (std::size_t j = 0; j < data_.points.size(); ++j)
      comp_log_[h][j] = detail::clamped_log_pmf(lb, data_.points[j], data_.log_coefs[j]);
  }

  void refresh_loglik() {
    const auto la = detail::clamped_logs(a_);
    double total = 0.0;
    for (std::size_t j = 0; j < data_.points.size(); ++j) {
      double top = kNegInf;
      for (int h = 0; h < H_; ++h) top = std::max(top, la[h] + comp_log_[h][j]);
      double s = 0.0;
      for (int h = 0; h < H_; ++h) s += std::exp(la[h] + comp_log_[h][j] - top);
      total += data_.counts[j] * (top + std::log(s));
    }
    loglik_ = total;
  }

  void refresh_all() {
    comp_log_.assign(static_cast<std::size_t>(H_), std::vector<double>(data_.points.size()));
    for (int h = 0; h < H_; ++h) refresh_component(static_cast<std::size_t>(h));
    refresh_loglik();
  }

  detail::DistinctData data_;
  ConjugatePrior prior_;
  int H_, L_;
  Engine rng_;
  std::vector<double> a_;
  std::vector<std::vector<double>> b_;
  std::vector<std::vector<double>> comp_log_;
  double loglik_ = 0.0;
  std::vector<double> log_step_;
  std::vector<std::size_t> accepted_, proposed_;
  std::size_t iteration_ = 0;
};

namespace detail {

/// Collapsed Gibbs over assignments with conditional parameter draws.
inline GibbsSamples collapsed_gibbs(const Dataset& d, int H, const ConjugatePrior& prior, const GibbsConfig& cfg) {
  Engine rng(cfg.seed);
  const std::size_t n = d.size();
  const int L = d.L;
  std::vector<double> total_beta(H, 0.0);
  for (int h = 0; h < H; ++h) total_beta[h] = std::accumulate(prior.beta[h].begin(), prior.beta[h].end(), 0.0);

  std::vector<int> z(n);
  std::vector<int> members(H, 0);
  std::vector<std::vector<int>> sums(H, std::vector<int>(L, 0));
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = static_cast<int>(uniform01(rng) * H);
    ++members[z[i]];
    for (int l = 0; l < L; ++l) sums[z[i]][l] += d.observations[i][l];
  }

  const DistinctData distinct(d);
  GibbsSamples out;
  std::vector<double> logp(H);
  for (std::size_t sweep = 0; sweep < cfg.sweeps; ++sweep) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& x = d.observations[i];
      --members[z[i]];
      for (int l = 0; l < L; ++l) sums[z[i]][l] -= x[l];
      for (int h = 0; h < H; ++h) {
        // log (alpha_h + n_h) + log DirMult(x | beta_h + s_h), dropping the
        // multinomial coefficient shared by every h.
        double v = std::log(prior.alpha[h] + members[h]);
        const double B = total_beta[h] + d.M * members[h];
        v += std::lgamma(B) - std::lgamma(B + d.M);
        for (int l = 0; l < L; ++l)
          if (x[l] > 0) {
            const double c = prior.beta[h][l] + sums[h][l];
            v += std::lgamma(c + x[l]) - std::lgamma(c);
          }
        logp[h] = v;
      }
      z[i] = static_cast<int>(categorical_log(rng, logp));
      ++members[z[i]];
      for (int l = 0; l < L; ++l) sums[z[i]][l] += x[l];
    }
    if (sweep < cfg.burn_in || (sweep - cfg.burn_in) % cfg.thinning != 0) continue;
    std::vector<double> ca(H);
    std::vector<std::vector<double>> cb(H, std::vector<double>(L));
    for (int h = 0; h < H; ++h) {
      ca[h] = prior.alpha[h] + members[h];
      for (int l = 0; l < L; ++l) cb[h][l] = prior.beta[h][l] + sums[h][l];
    }
    std::vector<std::vector<double>> bs;
    for (int h = 0; h < H; ++h) bs.push_back(dirichlet_draw(rng, cb[h]));
    auto w = make_params(dirichlet_draw(rng, ca), bs);
    out.energies.push_back(negative_log_likelihood(w, distinct));
    out.params.push_back(std::move(w));
    out.assignments.push_back(z);
  }
  return out;
}

}  // namespace detail

/// Posterior samples. Temperature 1 uses collapsed Gibbs and also returns
/// the latent assignments; any other temperature runs the tempered
/// Metropolis sampler and returns parameters and energies only.
inline GibbsSamples gibbs_posterior(const Dataset& d, int H, const ConjugatePrior& prior, const GibbsConfig& cfg) {
  cfg.validate();
  d.validate();
  prior.validate();
  if (prior.H() != H || prior.L() != d.L) throw DimensionError("prior and dataset dimensions disagree");
  if (cfg.temperature == 1.0) return detail::collapsed_gibbs(d, H, prior, cfg);

  TemperedSampler s(d, H, prior, cfg.seed);
  GibbsSamples out;
  for (std::size_t sweep = 0; sweep < cfg.sweeps; ++sweep) {
    if (cfg.temperature == 0.0) {
      s.draw_from_prior();
    } else {
      if (sweep == cfg.burn_in) s.reset_counters();
      s.sweep(cfg.temperature, sweep < cfg.burn_in);
    }
    if (sweep < cfg.burn_in || (sweep - cfg.burn_in) % cfg.thinning != 0) continue;
    out.params.push_back(s.params());
    out.energies.push_back(s.energy());
  }
  out.acceptance = s.acceptance();
  return out;
}

}  // namespace rlctmix
