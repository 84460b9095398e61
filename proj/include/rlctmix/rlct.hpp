#pragma once

// Closed-form real log canonical thresholds (lambda) and multiplicities (m),
// and the asymptotic laws they feed:
//   E[F_n] = nS + lambda log n - (m-1) log log n + O(1)
//   E[G_n] = lambda/n - (m-1)/(n log n) + o(1/(n log n))

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "rlctmix/error.hpp"
#include "rlctmix/numeric.hpp"

namespace rlctmix {

/// A positive hyperparameter, optionally carried as an exact rational p/q.
/// Equality against thresholds is exact when both sides are rational and
/// uses relative tolerance 1e-9 otherwise.
struct Hyperparameter {
  double value = 1.0;
  std::optional<std::pair<long long, long long>> rational;

  Hyperparameter() = default;
  Hyperparameter(double v) : value(v) {}  // NOLINT(google-explicit-constructor)
  static Hyperparameter ratio(long long num, long long den) {
    if (den <= 0 || num <= 0) throw DomainError("rational hyperparameter must be positive");
    Hyperparameter h(static_cast<double>(num) / static_cast<double>(den));
    h.rational = {num, den};
    return h;
  }
};

inline constexpr double kThresholdRelTol = 1e-9;

namespace detail {
// alpha == num/den, exactly when alpha is rational.
inline bool equals_ratio(const Hyperparameter& a, long long num, long long den) {
  if (a.rational) return a.rational->first * den == num * a.rational->second;
  return nearly_equal(a.value, static_cast<double>(num) / static_cast<double>(den),
                      kThresholdRelTol);
}
// h * num/den, staying rational when h is.
inline Hyperparameter scaled(const Hyperparameter& h, long long num, long long den) {
  if (h.rational) return Hyperparameter::ratio(h.rational->first * num, h.rational->second * den);
  return Hyperparameter(h.value * static_cast<double>(num) / static_cast<double>(den));
}
inline bool equals(const Hyperparameter& a, const Hyperparameter& b) {
  if (a.rational && b.rational)
    return a.rational->first * b.rational->second == b.rational->first * a.rational->second;
  return nearly_equal(a.value, b.value, kThresholdRelTol);
}
}  // namespace detail

enum class PriorKind { bounded_positive, dirichlet };

/// Prior on the mixing ratio of a two-component mixture. `alpha` is used
/// only for the Dirichlet kind.
struct PriorSpec {
  PriorKind kind = PriorKind::bounded_positive;
  Hyperparameter alpha{1.0};

  static PriorSpec bounded() { return {}; }
  static PriorSpec dirichlet(Hyperparameter a) {
    if (!(a.value > 0.0)) throw DomainError("Dirichlet alpha must be > 0");
    return {PriorKind::dirichlet, a};
  }
};

enum class RlctSource { main_theorem_bounded, main_theorem_dirichlet, matsuda, binomial_bound, regular };

inline const char* to_string(RlctSource s) {
  switch (s) {
    case RlctSource::main_theorem_bounded: return "main_theorem_bounded";
    case RlctSource::main_theorem_dirichlet: return "main_theorem_dirichlet";
    case RlctSource::matsuda: return "matsuda";
    case RlctSource::binomial_bound: return "binomial_bound";
    case RlctSource::regular: return "regular";
  }
  return "unknown";
}

struct RlctReport {
  double lambda = 0.0;
  int multiplicity = 1;
  RlctSource source = RlctSource::regular;
  /// False only for a binomial-mixture bound that is not known to be tight.
  bool is_exact = true;
};

/// lambda, m of a two-component L-category multinomial mixture learning a
/// single multinomial with all b*_l > 0.
///   bounded:   lambda = (L-1)/2 + min(1/2, (L-1)/4),     m = 2 iff L = 3
///   dirichlet: lambda = (L-1)/2 + min(alpha/2, (L-1)/4), m = 2 iff alpha = (L-1)/2
inline RlctReport rlct_two_component(int L, const PriorSpec& prior) {
  if (L < 2) throw DomainError("rlct_two_component: L must be >= 2");
  const double half_dim = (L - 1) / 2.0;
  const double cap = (L - 1) / 4.0;
  if (prior.kind == PriorKind::bounded_positive) {
    return {half_dim + std::min(0.5, cap), L == 3 ? 2 : 1, RlctSource::main_theorem_bounded, true};
  }
  const Hyperparameter& a = prior.alpha;
  if (!(a.value > 0.0)) throw DomainError("rlct_two_component: alpha must be > 0");
  const bool critical = detail::equals_ratio(a, L - 1, 2);
  // At the critical point both branches of the min coincide; use the exact cap.
  const double lambda = half_dim + (critical ? cap : std::min(a.value / 2.0, cap));
  return {lambda, critical ? 2 : 1, RlctSource::main_theorem_dirichlet, true};
}

/// The trinomial two-component value lambda = 3/2 under a bounded positive prior.
inline RlctReport rlct_matsuda() { return {1.5, 2, RlctSource::matsuda, true}; }

/// Identifiable regular model with d parameters: lambda = d/2, m = 1.
inline RlctReport rlct_regular(int d) {
  if (d < 1) throw DomainError("rlct_regular: d must be >= 1");
  return {d / 2.0, 1, RlctSource::regular, true};
}

/// Binomial-mixture bound setting. H1 probabilistic and H2 deterministic
/// components partition the H0 true components.
struct BinomialMixtureSpec {
  int M = 2;
  int H = 2;
  int H0 = 1;
  int H1 = 1;
  int H2 = 0;
  Hyperparameter alpha{1.0};
  Hyperparameter beta{1.0};

  void validate() const {
    if (M < 2) throw DomainError("binomial bound: M must be >= 2");
    if (H0 < 1 || H < H0) throw DomainError("binomial bound: need H >= H0 >= 1");
    if (H1 < 0 || H2 < 0 || H1 + H2 != H0)
      throw DomainError("binomial bound: H1 + H2 must equal H0");
    if (!(alpha.value > 0.0) || !(beta.value > 0.0))
      throw DomainError("binomial bound: alpha and beta must be > 0");
  }
};

/// Upper bound mu (and m_mu) on the RLCT of a binomial mixture. `is_exact`
/// is set when H = H0 + 1, where the bound is known to be attained.
///   M >= 3: mu = (H0-1+H1 M+H2 M beta)/2 + (H-H0)/2 min{alpha, M/2, beta M/2}
///           m  = 2 iff alpha = min{M/2, beta M/2}
///   M == 2: mu = (H0-1+H1 M+H2 M beta)/2 + (H-H0)/2 min{alpha, 1, beta}
///           m  = 3 if alpha = min{1,beta}, 2 if alpha > min{1,beta}, else 1
inline RlctReport rlct_binomial_bound(const BinomialMixtureSpec& s) {
  s.validate();
  const double a = s.alpha.value;
  const double b = s.beta.value;
  const double base = (s.H0 - 1 + s.H1 * s.M + s.H2 * s.M * b) / 2.0;
  const double excess = (s.H - s.H0) / 2.0;
  RlctReport r;
  r.source = RlctSource::binomial_bound;
  r.is_exact = (s.H == s.H0 + 1);
  if (s.M >= 3) {
    r.lambda = base + excess * std::min({a, s.M / 2.0, b * s.M / 2.0});
    // min{M/2, beta M/2} = (M/2) min{1, beta}
    const bool at_threshold = b < 1.0 ? detail::equals(s.alpha, detail::scaled(s.beta, s.M, 2))
                                      : detail::equals_ratio(s.alpha, s.M, 2);
    r.multiplicity = at_threshold ? 2 : 1;
  } else {
    r.lambda = base + excess * std::min({a, 1.0, b});
    const bool at_threshold =
        b < 1.0 ? detail::equals(s.alpha, s.beta) : detail::equals_ratio(s.alpha, 1, 1);
    r.multiplicity = at_threshold ? 3 : (a > std::min(1.0, b) ? 2 : 1);
  }
  return r;
}

/// nS + lambda log n - (m-1) log log n; the O(1) term is omitted.
inline double predict_free_energy(const RlctReport& r, double n, double entropy) {
  if (n < 3) throw DomainError("predict_free_energy: n must be >= 3");
  return n * entropy + r.lambda * std::log(n) - (r.multiplicity - 1) * std::log(std::log(n));
}

/// lambda/n - (m-1)/(n log n)
inline double predict_gen_error(const RlctReport& r, double n) {
  if (n < 3) throw DomainError("predict_gen_error: n must be >= 3");
  return r.lambda / n - (r.multiplicity - 1) / (n * std::log(n));
}

/// Critical mixing-ratio hyperparameter alpha_c = (L-1)/2.
inline double phase_transition_alpha(int L) {
  if (L < 2) throw DomainError("phase_transition_alpha: L must be >= 2");
  return (L - 1) / 2.0;
}

/// E[F_n(alpha)] without the O(1) term, across the three regimes around
/// alpha_c. The log n coefficient is the main-theorem lambda, so below alpha_c
/// it is (L-1)/2 + alpha/2, at alpha_c it gains -log log n, and above alpha_c
/// it is 3(L-1)/4 independent of alpha.
inline double free_energy_regime(Hyperparameter alpha, int L, double n, double entropy) {
  return predict_free_energy(rlct_two_component(L, PriorSpec::dirichlet(alpha)), n, entropy);
}

}  // namespace rlctmix
