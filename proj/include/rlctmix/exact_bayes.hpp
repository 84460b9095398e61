#pragma once

// Exact finite-sample Bayes for H-component multinomial mixtures under the
// conjugate prior
//   phi(a, b) = R(alpha, beta) prod_h a_h^{alpha_h - 1} prod_l b_hl^{beta_hl - 1}.
//
// For a latent assignment Y of the n observations to components the
// parameter integral is closed form, so
//   Z_n = sum_Y  R(alpha, beta) / R(alpha + n(Y), beta + s(Y)) * prod_i M!/prod_l X_il!
// where n_h(Y) counts observations in component h and s_hl(Y) sums their
// l-th counts. The sum over the H^n assignments is walked in reflected Gray
// code order so each step moves one observation between two components.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

#include "rlctmix/domain.hpp"
#include "rlctmix/error.hpp"
#include "rlctmix/gray_code.hpp"
#include "rlctmix/numeric.hpp"

namespace rlctmix {

/// Dirichlet(alpha) on the mixing ratio and Dirichlet(beta_h) on each component.
struct ConjugatePrior {
  std::vector<double> alpha;              // H
  std::vector<std::vector<double>> beta;  // H x L

  static ConjugatePrior symmetric(int H, int L, double alpha, double beta) {
    ConjugatePrior p;
    p.alpha.assign(static_cast<std::size_t>(H), alpha);
    p.beta.assign(static_cast<std::size_t>(H), std::vector<double>(static_cast<std::size_t>(L), beta));
    p.validate();
    return p;
  }

  int H() const noexcept { return static_cast<int>(alpha.size()); }
  int L() const noexcept { return beta.empty() ? 0 : static_cast<int>(beta.front().size()); }

  void validate() const {
    if (alpha.empty() || beta.size() != alpha.size())
      throw DimensionError("ConjugatePrior: alpha and beta must both have H rows");
    const std::size_t L = beta.front().size();
    if (L < 2) throw DimensionError("ConjugatePrior: L must be >= 2");
    for (double a : alpha)
      if (!(a > 0.0)) throw DomainError("ConjugatePrior: alpha entries must be > 0");
    for (const auto& row : beta) {
      if (row.size() != L) throw DimensionError("ConjugatePrior: ragged beta");
      for (double b : row)
        if (!(b > 0.0)) throw DomainError("ConjugatePrior: beta entries must be > 0");
    }
  }

  /// Copy with component rows reordered by `perm` (new h = old perm[h]).
  ConjugatePrior permuted(const std::vector<std::size_t>& perm) const {
    ConjugatePrior p;
    for (std::size_t h : perm) {
      p.alpha.push_back(alpha.at(h));
      p.beta.push_back(beta.at(h));
    }
    return p;
  }
};

/// log R(alpha, beta) = log Gamma(sum alpha) - sum log Gamma(alpha_h)
///   + sum_h [log Gamma(sum_l beta_hl) - sum_l log Gamma(beta_hl)],
/// the log of the prior density's normalizing coefficient (minus the log of
/// the unnormalized mass).
inline double log_normalizer(const std::vector<double>& alpha,
                             const std::vector<std::vector<double>>& beta) {
  ConjugatePrior{alpha, beta}.validate();
  double total_alpha = 0.0;
  double v = 0.0;
  for (double a : alpha) {
    total_alpha += a;
    v -= std::lgamma(a);
  }
  v += std::lgamma(total_alpha);
  for (const auto& row : beta) {
    double total = 0.0;
    for (double b : row) {
      total += b;
      v -= std::lgamma(b);
    }
    v += std::lgamma(total);
  }
  return v;
}

inline double log_normalizer(const ConjugatePrior& p) { return log_normalizer(p.alpha, p.beta); }

enum class FreeEnergyMethod { enumeration, quadrature, wbic, thermo };

inline const char* to_string(FreeEnergyMethod m) {
  switch (m) {
    case FreeEnergyMethod::enumeration: return "enumeration";
    case FreeEnergyMethod::quadrature: return "quadrature";
    case FreeEnergyMethod::wbic: return "wbic";
    case FreeEnergyMethod::thermo: return "thermo";
  }
  return "unknown";
}

/// F_n = -log Z_n in nats. Monte Carlo methods also fill `standard_error`
/// and may raise `mixing_warning`.
struct FreeEnergyValue {
  double value = 0.0;
  std::size_t n = 0;
  FreeEnergyMethod method = FreeEnergyMethod::enumeration;
  double standard_error = 0.0;
  bool mixing_warning = false;
};

struct EnumerationOptions {
  /// Largest n accepted (cost grows as H^n).
  std::size_t max_n = 22;
  /// Assignment space is split into this many contiguous Gray-code ranges;
  /// the result is bitwise reproducible for a fixed block count.
  std::size_t blocks = 1;
  /// Worker threads used to run the blocks.
  std::size_t threads = 1;
};

namespace detail {

/// Sufficient statistics and lgamma tables shared by every enumeration path.
class AssignmentModel {
 public:
  AssignmentModel(const Dataset& d, int H, const ConjugatePrior& prior, int extra_observations = 0)
      : H_(H), L_(d.L), M_(d.M), n_(d.observations.size()) {
    d.validate();
    prior.validate();
    if (prior.H() != H) throw DimensionError("prior has the wrong number of components");
    if (prior.L() != d.L) throw DimensionError("prior and dataset disagree on L");
    const std::size_t cap_n = n_ + static_cast<std::size_t>(extra_observations);
    for (int h = 0; h < H; ++h) {
      alpha_table_.emplace_back(prior.alpha[h], cap_n + 1);
      double total_beta = 0.0;
      std::vector<LgammaTable> rows;
      for (int l = 0; l < L_; ++l) {
        rows.emplace_back(prior.beta[h][l], cap_n * M_ + 1);
        total_beta += prior.beta[h][l];
      }
      beta_table_.push_back(std::move(rows));
      beta_total_table_.emplace_back(total_beta, cap_n + 1, static_cast<double>(M_));
      total_beta_.push_back(total_beta);
    }
    alpha_ = prior.alpha;
    for (double a : prior.alpha) total_alpha_ += a;
    coefficient_ = 0.0;
    for (const auto& x : d.observations) {
      coefficient_ += log_multinomial_coefficient(x);
      std::vector<std::pair<int, int>> nz;
      for (int l = 0; l < L_; ++l)
        if (x[l] > 0) nz.emplace_back(l, x[l]);
      nonzero_.push_back(std::move(nz));
    }
    constant_ = log_normalizer(prior) - std::lgamma(total_alpha_ + static_cast<double>(n_)) + coefficient_;
  }

  int H() const noexcept { return H_; }
  int L() const noexcept { return L_; }
  std::size_t n() const noexcept { return n_; }
  double constant() const noexcept { return constant_; }

  /// Mutable per-assignment state: counts per component.
  struct State {
    std::vector<int> members;           // n_h
    std::vector<std::vector<int>> sums;  // s_hl
    std::vector<double> terms;          // T_h
  };

  State make_state(const std::vector<int>& assignment) const {
    State s{std::vector<int>(H_, 0), std::vector<std::vector<int>>(H_, std::vector<int>(L_, 0)),
            std::vector<double>(H_, 0.0)};
    for (std::size_t i = 0; i < n_; ++i) add(s, i, assignment[i]);
    for (int h = 0; h < H_; ++h) s.terms[h] = term(s, h);
    return s;
  }

  void add(State& s, std::size_t i, int h) const {
    ++s.members[h];
    for (auto [l, c] : nonzero_[i]) s.sums[h][l] += c;
  }
  void remove(State& s, std::size_t i, int h) const {
    --s.members[h];
    for (auto [l, c] : nonzero_[i]) s.sums[h][l] -= c;
  }

  /// T_h = log Gamma(alpha_h + n_h) + sum_l log Gamma(beta_hl + s_hl) - log Gamma(B_h + M n_h)
  double term(const State& s, int h) const {
    double v = alpha_table_[h][s.members[h]] - beta_total_table_[h][s.members[h]];
    for (int l = 0; l < L_; ++l) v += beta_table_[h][l][s.sums[h][l]];
    return v;
  }

  /// Move observation i from component `from` to `to` and refresh both terms.
  void move(State& s, std::size_t i, int from, int to) const {
    remove(s, i, from);
    add(s, i, to);
    s.terms[from] = term(s, from);
    s.terms[to] = term(s, to);
  }

  double log_weight(const State& s) const {
    double v = constant_;
    for (double t : s.terms) v += t;
    return v;
  }

  /// log of the posterior predictive mass of x given the assignment state:
  /// log sum_h (alpha_h+n_h)/(A+n) DirMult(x | beta_h + s_h).
  double log_predictive(const State& s, const CountVector& x, double log_coef) const {
    double top = kNegInf;
    double terms[16];
    std::vector<double> spill;
    double* buf = terms;
    if (H_ > 16) {
      spill.resize(H_);
      buf = spill.data();
    }
    for (int h = 0; h < H_; ++h) {
      const int nh = s.members[h];
      double v = std::log(alpha_[h] + nh) + log_coef;
      v += beta_total_table_[h][nh] - beta_total_table_[h][nh + 1];
      for (int l = 0; l < L_; ++l) {
        if (x[l] == 0) continue;
        v += beta_table_[h][l][s.sums[h][l] + x[l]] - beta_table_[h][l][s.sums[h][l]];
      }
      buf[h] = v;
      top = std::max(top, v);
    }
    double acc = 0.0;
    for (int h = 0; h < H_; ++h) acc += std::exp(buf[h] - top);
    return top + std::log(acc) - std::log(total_alpha_ + static_cast<double>(n_));
  }

 private:
  int H_, L_, M_;
  std::size_t n_;
  std::vector<LgammaTable> alpha_table_;
  std::vector<std::vector<LgammaTable>> beta_table_;
  std::vector<LgammaTable> beta_total_table_;
  std::vector<double> total_beta_;
  std::vector<double> alpha_;
  double total_alpha_ = 0.0;
  double coefficient_ = 0.0;
  double constant_ = 0.0;
  std::vector<std::vector<std::pair<int, int>>> nonzero_;
};

struct BlockResult {
  LogSumExp evidence;
  std::vector<LogSumExp> predictive;  // per support point, weighted by the assignment
};

/// Walk Gray-code ranks [begin, end) and accumulate.
inline BlockResult enumerate_block(const AssignmentModel& model, std::uint64_t begin, std::uint64_t end,
                                   const Support* support, const std::vector<double>* log_coefs) {
  BlockResult out;
  if (support) out.predictive.resize(support->size());
  if (begin >= end) return out;
  ReflectedGrayCounter counter(model.n(), model.H(), begin);
  auto state = model.make_state(counter.code());
  auto visit = [&] {
    const double lw = model.log_weight(state);
    out.evidence.push(lw);
    if (support)
      for (std::size_t k = 0; k < support->size(); ++k)
        out.predictive[k].push(lw + model.log_predictive(state, (*support)[k], (*log_coefs)[k]));
  };
  visit();
  ReflectedGrayCounter::Step step{};
  for (std::uint64_t r = begin + 1; r < end; ++r) {
    counter.next(step);
    model.move(state, step.position, step.from, step.to);
    visit();
  }
  return out;
}

inline BlockResult enumerate_all(const AssignmentModel& model, const EnumerationOptions& opt,
                                 const Support* support) {
  const std::uint64_t total = checked_power(static_cast<std::uint64_t>(model.H()), model.n());
  const std::size_t blocks = std::max<std::size_t>(1, std::min<std::uint64_t>(opt.blocks, total));
  std::vector<double> log_coefs;
  if (support)
    for (const auto& x : *support) log_coefs.push_back(log_multinomial_coefficient(x));
  std::vector<BlockResult> parts(blocks);
  auto run = [&](std::size_t b) {
    const std::uint64_t begin = total / blocks * b + std::min<std::uint64_t>(b, total % blocks);
    const std::uint64_t end = begin + total / blocks + (b < total % blocks ? 1 : 0);
    parts[b] = enumerate_block(model, begin, end, support, support ? &log_coefs : nullptr);
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(opt.threads, blocks));
  if (threads == 1) {
    for (std::size_t b = 0; b < blocks; ++b) run(b);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t b = t; b < blocks; b += threads) run(b);
      });
    for (auto& th : pool) th.join();
  }
  BlockResult merged;
  if (support) merged.predictive.resize(support->size());
  for (const auto& p : parts) {  // fixed block order
    merged.evidence.merge(p.evidence);
    for (std::size_t k = 0; k < merged.predictive.size(); ++k) merged.predictive[k].merge(p.predictive[k]);
  }
  return merged;
}

inline void check_cap(std::size_t n, const EnumerationOptions& opt) {
  if (n > opt.max_n)
    throw SizeError("enumeration cap exceeded: n = " + std::to_string(n) +
                    " > max_n = " + std::to_string(opt.max_n));
}

}  // namespace detail

/// F_n by exhaustive enumeration of the H^n latent assignments.
inline FreeEnergyValue log_marginal_enumeration(const Dataset& d, int H, const ConjugatePrior& prior,
                                                const EnumerationOptions& opt = {}) {
  detail::check_cap(d.size(), opt);
  const detail::AssignmentModel model(d, H, prior);
  const auto result = detail::enumerate_all(model, opt, nullptr);
  return {-result.evidence.value(), d.size(), FreeEnergyMethod::enumeration};
}

/// log of the joint mass of (X^n, Y) integrated over parameters, for one
/// assignment Y (entries in [0, H)).
inline double log_assignment_weight(const Dataset& d, int H, const ConjugatePrior& prior,
                                    const std::vector<int>& assignment) {
  if (assignment.size() != d.size()) throw DimensionError("assignment length must equal n");
  for (int z : assignment)
    if (z < 0 || z >= H) throw DomainError("assignment entry out of range");
  const detail::AssignmentModel model(d, H, prior);
  return model.log_weight(model.make_state(assignment));
}

/// Exact posterior over all H^n assignments, indexed by sum_i z_i H^i.
inline std::vector<double> assignment_posterior(const Dataset& d, int H, const ConjugatePrior& prior,
                                                const EnumerationOptions& opt = {}) {
  detail::check_cap(d.size(), opt);
  const detail::AssignmentModel model(d, H, prior);
  const std::uint64_t total = checked_power(static_cast<std::uint64_t>(H), d.size());
  std::vector<double> logw(total);
  std::vector<std::uint64_t> place(d.size(), 1);
  for (std::size_t i = 1; i < place.size(); ++i) place[i] = place[i - 1] * static_cast<std::uint64_t>(H);
  ReflectedGrayCounter counter(d.size(), H);
  auto state = model.make_state(counter.code());
  std::uint64_t index = 0;
  LogSumExp z;
  ReflectedGrayCounter::Step step{};
  for (;;) {
    logw[index] = model.log_weight(state);
    z.push(logw[index]);
    if (!counter.next(step)) break;
    model.move(state, step.position, step.from, step.to);
    index = index + place[step.position] * static_cast<std::uint64_t>(step.to) -
            place[step.position] * static_cast<std::uint64_t>(step.from);
  }
  const double log_z = z.value();
  for (double& v : logw) v = std::exp(v - log_z);
  return logw;
}

/// p(x | X^n) = Z_{n+1}(X^n + x) / Z_n(X^n).
inline double predictive_pmf(const Dataset& d, int H, const ConjugatePrior& prior, const CountVector& x,
                             const EnumerationOptions& opt = {}) {
  detail::check_cap(d.size() + 1, opt);
  const double fn = log_marginal_enumeration(d, H, prior, opt).value;
  const double fn1 = log_marginal_enumeration(d.with(x), H, prior, opt).value;
  return std::exp(fn - fn1);
}

/// The full predictive distribution over D (support order) from a single
/// pass: each assignment contributes its posterior weight times the
/// conjugate predictive sum_h (alpha_h+n_h)/(A+n) DirMult(x | beta_h+s_h).
inline std::vector<double> predictive_distribution(const Dataset& d, int H, const ConjugatePrior& prior,
                                                   const EnumerationOptions& opt = {}) {
  detail::check_cap(d.size(), opt);
  const detail::AssignmentModel model(d, H, prior, 1);
  const Support support(d.L, d.M);
  const auto result = detail::enumerate_all(model, opt, &support);
  const double log_z = result.evidence.value();
  std::vector<double> out(support.size());
  for (std::size_t k = 0; k < support.size(); ++k) out[k] = std::exp(result.predictive[k].value() - log_z);
  return out;
}

/// G_n = KL(q || p(.|X^n)) over D.
inline double gen_error_exact(const Dataset& d, const MixtureParams& truth, int H, const ConjugatePrior& prior,
                              const EnumerationOptions& opt = {}) {
  if (static_cast<int>(truth.categories()) != d.L) throw DimensionError("truth and dataset disagree on L");
  const Support support(d.L, d.M);
  const auto lq = mixture_log_pmf_table(truth, support);
  for (double v : lq)
    if (v == kNegInf) throw DomainError("gen_error_exact: truth must have full support on D");
  const auto pred = predictive_distribution(d, H, prior, opt);
  std::vector<double> lp(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) lp[k] = std::log(pred[k]);
  return detail::kl_from_logs(lq, lp, support);
}

/// sum_x q(x) F_{n+1}(X^n + x) - F_n(X^n) - S; equals G_n for every dataset.
inline double gen_error_via_free_energy(const Dataset& d, const MixtureParams& truth, int H,
                                        const ConjugatePrior& prior, const EnumerationOptions& opt = {}) {
  detail::check_cap(d.size() + 1, opt);
  const Support support(d.L, d.M);
  const double fn = log_marginal_enumeration(d, H, prior, opt).value;
  double expected = 0.0;
  for (const auto& x : support) {
    const double q = mixture_pmf(truth, x);
    if (q > 0.0) expected += q * log_marginal_enumeration(d.with(x), H, prior, opt).value;
  }
  return expected - fn - entropy(truth, d.M);
}

// ---------------------------------------------------------------------------
// Quadrature oracle

namespace detail {

/// Stick-breaking map from [0,1]^{K-1} to the K-simplex; returns the
/// Jacobian |dp/du| of the first K-1 coordinates.
inline double stick_break(const double* u, std::size_t K, double* p) {
  double rest = 1.0;
  double jac = 1.0;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    p[k] = rest * u[k];
    jac *= rest;
    rest -= p[k];
  }
  p[K - 1] = std::max(rest, 0.0);
  return jac;
}

}  // namespace detail

/// Z_n by the midpoint rule over the unit cube, pulled back to the product
/// of simplices by stick breaking. Only for total dimension <= 4 and
/// alpha, beta >= 1 (bounded prior density).
inline FreeEnergyValue log_marginal_quadrature(const Dataset& d, int H, const ConjugatePrior& prior,
                                               int grid_points_per_dim) {
  d.validate();
  prior.validate();
  if (prior.H() != H || prior.L() != d.L) throw DimensionError("prior and dataset dimensions disagree");
  if (grid_points_per_dim < 1) throw DomainError("grid_points_per_dim must be >= 1");
  const std::size_t L = static_cast<std::size_t>(d.L);
  const std::size_t dims = static_cast<std::size_t>(H - 1) + static_cast<std::size_t>(H) * (L - 1);
  if (dims > 4) throw DimensionError("quadrature limited to parameter dimension <= 4");
  for (double a : prior.alpha)
    if (a < 1.0) throw DomainError("quadrature needs alpha >= 1 (bounded prior density)");
  for (const auto& row : prior.beta)
    for (double b : row)
      if (b < 1.0) throw DomainError("quadrature needs beta >= 1 (bounded prior density)");

  // Distinct observations with multiplicities.
  std::vector<CountVector> distinct;
  std::vector<int> mult;
  double coef = 0.0;
  for (const auto& x : d.observations) {
    coef += log_multinomial_coefficient(x);
    auto it = std::find(distinct.begin(), distinct.end(), x);
    if (it == distinct.end()) {
      distinct.push_back(x);
      mult.push_back(1);
    } else {
      ++mult[static_cast<std::size_t>(it - distinct.begin())];
    }
  }
  const double log_r = log_normalizer(prior);
  const std::size_t Hs = static_cast<std::size_t>(H);
  const double cell = 1.0 / grid_points_per_dim;
  std::vector<std::size_t> idx(dims, 0);
  std::vector<double> u(dims), a(Hs), b(Hs * L);
  LogSumExp acc;
  for (;;) {
    for (std::size_t k = 0; k < dims; ++k) u[k] = (static_cast<double>(idx[k]) + 0.5) * cell;
    double log_f = log_r + coef;
    double jac = detail::stick_break(u.data(), Hs, a.data());
    for (std::size_t h = 0; h < Hs; ++h)
      jac *= detail::stick_break(u.data() + (Hs - 1) + h * (L - 1), L, b.data() + h * L);
    log_f += std::log(jac);
    for (std::size_t h = 0; h < Hs; ++h) {
      if (prior.alpha[h] != 1.0) log_f += (prior.alpha[h] - 1.0) * std::log(a[h]);
      for (std::size_t l = 0; l < L; ++l)
        if (prior.beta[h][l] != 1.0) log_f += (prior.beta[h][l] - 1.0) * std::log(b[h * L + l]);
    }
    for (std::size_t j = 0; j < distinct.size(); ++j) {
      double p = 0.0;
      for (std::size_t h = 0; h < Hs; ++h) {
        double t = a[h];
        for (std::size_t l = 0; l < L; ++l)
          for (int c = 0; c < distinct[j][l]; ++c) t *= b[h * L + l];
        p += t;
      }
      log_f += mult[j] * std::log(p);
    }
    acc.push(log_f);
    std::size_t k = 0;
    while (k < dims && ++idx[k] == static_cast<std::size_t>(grid_points_per_dim)) idx[k++] = 0;
    if (k == dims) break;
  }
  const double log_z = acc.value() + static_cast<double>(dims) * std::log(cell);
  return {-log_z, d.size(), FreeEnergyMethod::quadrature};
}

}  // namespace rlctmix
