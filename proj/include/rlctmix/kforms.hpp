#pragma once

// Loss forms for the two-component mixture p(x|w) = a Mul(x|b) + (1-a) Mul(x|c)
// learning a single multinomial Mul(x|b*), and the coordinate changes that
// bring K to the normal-crossing-like form K3.
//
//   f(x; w) = a prod b_l^x_l + (1-a) prod c_l^x_l - prod b*_l^x_l   (l < L)
//   K1 = sum_{x in D} f^2
//   K2 = sum_{l<L} (b_l-b*_l)^2 (c_l-b*_l)^2 + sum_{x in {0,1}^{L-1}} f^2
//   K3 = sum_{l<L} delta_l^2 + sum_{l<L} a^2 beta_l^4
//
// Phi1: u = (a, beta, gamma) -> w with b = b* + beta, c = b* + gamma on the
// first L-1 coordinates (the last one is fixed by the simplex).
// Phi2: v = (a, beta, delta) -> u with gamma = (delta - a beta)/(1-a).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "rlctmix/domain.hpp"
#include "rlctmix/error.hpp"
#include "rlctmix/random.hpp"

namespace rlctmix {

struct TwoComponentPoint {
  double a = 0.5;
  SimplexVector b;
  SimplexVector c;

  TwoComponentPoint(double a_, SimplexVector b_, SimplexVector c_) : a(a_), b(std::move(b_)), c(std::move(c_)) {
    if (!(a >= 0.0 && a <= 1.0)) throw DomainError("mixing ratio must lie in [0,1]");
    if (b.size() != c.size()) throw DimensionError("components must share L");
  }

  std::size_t L() const noexcept { return b.size(); }

  MixtureParams mixture() const { return MixtureParams({a, 1.0 - a}, {b, c}); }

  /// Same distribution with a <= 1/2, obtained by swapping the components.
  TwoComponentPoint canonical() const { return a <= 0.5 ? *this : TwoComponentPoint(1.0 - a, c, b); }
};

/// (a, beta, gamma); beta and gamma have length L-1.
struct ReparamPointU {
  double a = 0.0;
  std::vector<double> beta;
  std::vector<double> gamma;
};

/// (a, beta, delta); beta and delta have length L-1.
struct ReparamPointV {
  double a = 0.0;
  std::vector<double> beta;
  std::vector<double> delta;
};

namespace detail {

inline double ipow(double base, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

inline void check_truth(const SimplexVector& truth, std::size_t L) {
  if (truth.size() != L) throw DimensionError("truth and point disagree on L");
  for (double v : truth.probs())
    if (!(v > 0.0)) throw DomainError("truth must have all entries > 0");
}

inline SimplexVector simplex_from_free(const SimplexVector& anchor, std::span<const double> shift) {
  std::vector<double> p(anchor.size());
  double total = 0.0;
  for (std::size_t l = 0; l + 1 < p.size(); ++l) {
    p[l] = anchor[l] + shift[l];
    total += p[l];
  }
  p.back() = 1.0 - total;
  constexpr double slack = 1e-15;
  for (double& v : p) {
    if (v < -slack || v > 1.0 + slack) throw DomainError("image lies outside the simplex");
    v = std::clamp(v, 0.0, 1.0);
  }
  return SimplexVector(std::move(p));
}

}  // namespace detail

/// f_{L-1}(x; w) for x given on its first L-1 coordinates.
inline double f_poly(std::span<const int> x, const TwoComponentPoint& p, const SimplexVector& truth) {
  const std::size_t L = p.L();
  detail::check_truth(truth, L);
  if (x.size() != L - 1) throw DimensionError("f_poly takes the first L-1 coordinates of x");
  double pb = 1.0, pc = 1.0, ps = 1.0;
  for (std::size_t l = 0; l + 1 < L; ++l) {
    if (x[l] < 0) throw DomainError("f_poly: negative exponent");
    pb *= detail::ipow(p.b[l], x[l]);
    pc *= detail::ipow(p.c[l], x[l]);
    ps *= detail::ipow(truth[l], x[l]);
  }
  return p.a * pb + (1.0 - p.a) * pc - ps;
}

/// Three-term recurrence residual in coordinate j (1-based, 2 <= j <= L-1):
///   f(x) - (b_j+c_j) f(x-e_j) + b_j c_j f(x-2e_j)
///     + (b_j-b*_j)(c_j-b*_j) b*_j^{x_j-2} prod_{l != j} b*_l^{x_l}
/// which vanishes identically.
inline double f_identity_residual(std::span<const int> x, std::size_t j, const TwoComponentPoint& p,
                                   const SimplexVector& truth) {
  const std::size_t L = p.L();
  if (j < 2 || j + 1 > L) throw DomainError("f_identity_residual: j must lie in [2, L-1]");
  if (x.size() != L - 1) throw DimensionError("f_identity_residual takes the first L-1 coordinates of x");
  const std::size_t k = j - 1;
  if (x[k] < 2) throw DomainError("f_identity_residual: x_j must be >= 2");
  std::vector<int> x1(x.begin(), x.end()), x2(x.begin(), x.end());
  x1[k] -= 1;
  x2[k] -= 2;
  const double bj = p.b[k], cj = p.c[k], sj = truth[k];
  double tail = (bj - sj) * (cj - sj) * detail::ipow(sj, x[k] - 2);
  for (std::size_t l = 0; l + 1 < L; ++l)
    if (l != k) tail *= detail::ipow(truth[l], x[l]);
  return f_poly(x, p, truth) - (bj + cj) * f_poly(x1, p, truth) + bj * cj * f_poly(x2, p, truth) + tail;
}

/// K(w) = KL(Mul(b*) || p(.|w)) over D.
inline double K_exact(const TwoComponentPoint& p, const SimplexVector& truth, int M) {
  detail::check_truth(truth, p.L());
  return kl_divergence(MixtureParams::single(truth), p.mixture(), M);
}

/// K1 = sum over D of f^2, with f taken on the first L-1 coordinates.
inline double K1(const TwoComponentPoint& p, const SimplexVector& truth, int M) {
  double s = 0.0;
  for (const auto& x : Support(static_cast<int>(p.L()), M)) {
    const double f = f_poly(x.span().first(p.L() - 1), p, truth);
    s += f * f;
  }
  return s;
}

inline double K2(const TwoComponentPoint& p, const SimplexVector& truth) {
  const std::size_t L = p.L();
  detail::check_truth(truth, L);
  double s = 0.0;
  for (std::size_t l = 0; l + 1 < L; ++l) {
    const double t = (p.b[l] - truth[l]) * (p.c[l] - truth[l]);
    s += t * t;
  }
  // D' = {0,1}^{L-1}, including the all-zeros point where f = 0.
  std::vector<int> x(L - 1, 0);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (L - 1)); ++mask) {
    for (std::size_t l = 0; l + 1 < L; ++l) x[l] = static_cast<int>((mask >> l) & 1U);
    const double f = f_poly(x, p, truth);
    s += f * f;
  }
  return s;
}

inline double K3(const ReparamPointV& v) {
  if (v.beta.size() != v.delta.size()) throw DimensionError("K3: beta and delta lengths differ");
  double s = 0.0;
  for (std::size_t l = 0; l < v.beta.size(); ++l) {
    const double b2 = v.beta[l] * v.beta[l];
    s += v.delta[l] * v.delta[l] + v.a * v.a * b2 * b2;
  }
  return s;
}

/// K' = sum over D of (p(x|w) - q(x))^2. On a region where p >= p_min,
/// K'/2 <= K <= K'/p_min (Pinsker and the chi-square bound).
inline double K_prime(const TwoComponentPoint& p, const SimplexVector& truth, int M) {
  detail::check_truth(truth, p.L());
  const auto w = p.mixture();
  const auto q = MixtureParams::single(truth);
  double s = 0.0;
  for (const auto& x : Support(static_cast<int>(p.L()), M)) {
    const double d = mixture_pmf(w, x) - mixture_pmf(q, x);
    s += d * d;
  }
  return s;
}

inline TwoComponentPoint phi1(const ReparamPointU& u, const SimplexVector& truth) {
  const std::size_t L = truth.size();
  if (u.beta.size() + 1 != L || u.gamma.size() + 1 != L) throw DimensionError("phi1: lengths must be L-1");
  detail::check_truth(truth, L);
  return TwoComponentPoint(u.a, detail::simplex_from_free(truth, u.beta),
                           detail::simplex_from_free(truth, u.gamma));
}

inline ReparamPointU phi1_inverse(const TwoComponentPoint& p, const SimplexVector& truth) {
  const std::size_t L = p.L();
  detail::check_truth(truth, L);
  ReparamPointU u{p.a, std::vector<double>(L - 1), std::vector<double>(L - 1)};
  for (std::size_t l = 0; l + 1 < L; ++l) {
    u.beta[l] = p.b[l] - truth[l];
    u.gamma[l] = p.c[l] - truth[l];
  }
  return u;
}

/// gamma = (delta - a beta)/(1-a); defined on the restricted range a <= 1/2.
inline ReparamPointU phi2(const ReparamPointV& v) {
  if (v.a < 0.0 || v.a > 0.5) throw DomainError("phi2 requires 0 <= a <= 1/2");
  if (v.beta.size() != v.delta.size()) throw DimensionError("phi2: beta and delta lengths differ");
  ReparamPointU u{v.a, v.beta, std::vector<double>(v.beta.size())};
  for (std::size_t l = 0; l < v.beta.size(); ++l) u.gamma[l] = (v.delta[l] - v.a * v.beta[l]) / (1.0 - v.a);
  return u;
}

/// delta = a beta + (1-a) gamma.
inline ReparamPointV phi2_inverse(const ReparamPointU& u) {
  if (u.beta.size() != u.gamma.size()) throw DimensionError("phi2_inverse: beta and gamma lengths differ");
  ReparamPointV v{u.a, u.beta, std::vector<double>(u.beta.size())};
  for (std::size_t l = 0; l < u.beta.size(); ++l) v.delta[l] = u.a * u.beta[l] + (1.0 - u.a) * u.gamma[l];
  return v;
}

/// det d(Phi2)/dv = (1-a)^{-(L-1)}; its inverse (1-a)^{L-1} is >= 2^{-(L-1)} for a <= 1/2.
inline double phi2_jacobian_det(const ReparamPointV& v) {
  return std::pow(1.0 - v.a, -static_cast<double>(v.beta.size()));
}

// ---------------------------------------------------------------------------
// Fuzz suites

struct KformsCheckOptions {
  std::size_t samples = 10000;
  std::vector<int> Ls{3, 4, 5};
  int max_exponent = 6;
  std::uint64_t seed = 20240601;
  double residual_tolerance = 1e-10;
  double zero_threshold = 1e-10;
};

struct KformsCheckReport {
  std::size_t identity_points = 0;
  double identity_worst = 0.0;
  bool identity_pass = true;
  std::size_t zero_set_points = 0;
  std::size_t zero_set_disagreements = 0;
  bool zero_set_pass = true;
  double roundtrip_worst = 0.0;
  bool roundtrip_pass = true;
  bool pass() const noexcept { return identity_pass && zero_set_pass && roundtrip_pass; }
};

/// Truth with every entry >= 0.05.
inline SimplexVector random_truth(Engine& rng, std::size_t L) {
  for (;;) {
    auto p = dirichlet_draw(rng, std::vector<double>(L, 2.0));
    if (*std::min_element(p.begin(), p.end()) >= 0.05) {
      const double t = std::accumulate(p.begin(), p.end(), 0.0);
      for (double& v : p) v /= t;
      return SimplexVector(std::move(p));
    }
  }
}

namespace detail {

inline SimplexVector perturb(Engine& rng, const SimplexVector& base, double scale) {
  for (;;) {
    std::vector<double> d(base.size());
    double mean = 0.0;
    for (double& v : d) {
      v = scale * standard_normal(rng);
      mean += v / static_cast<double>(d.size());
    }
    std::vector<double> p(base.size());
    bool ok = true;
    double total = 0.0;
    for (std::size_t l = 0; l + 1 < p.size(); ++l) {
      p[l] = base[l] + d[l] - mean;
      ok = ok && p[l] >= 0.0;
      total += p[l];
    }
    p.back() = 1.0 - total;
    if (ok && p.back() >= 0.0) return SimplexVector(std::move(p));
  }
}

}  // namespace detail

/// A point either drawn uniformly or placed near the truth variety
/// {b=c=b*} u {a=1, b=b*} u {a=0, c=b*} at a random scale.
inline TwoComponentPoint random_point_near_truth(Engine& rng, const SimplexVector& truth) {
  const std::size_t L = truth.size();
  const double scales[] = {1e-1, 1e-3, 1e-7};
  const int kind = static_cast<int>(uniform01(rng) * 4.0);
  if (kind == 0)
    return TwoComponentPoint(uniform01(rng), SimplexVector(dirichlet_draw(rng, std::vector<double>(L, 1.0))),
                             SimplexVector(dirichlet_draw(rng, std::vector<double>(L, 1.0))));
  const double s = scales[static_cast<int>(uniform01(rng) * 3.0) % 3];
  const double da = s * standard_normal(rng);
  const auto any = SimplexVector(dirichlet_draw(rng, std::vector<double>(L, 1.0)));
  switch (kind) {
    case 1:
      return TwoComponentPoint(uniform01(rng), detail::perturb(rng, truth, s), detail::perturb(rng, truth, s));
    case 2:
      return TwoComponentPoint(std::clamp(1.0 - std::abs(da), 0.0, 1.0), detail::perturb(rng, truth, s), any);
    default:
      return TwoComponentPoint(std::clamp(std::abs(da), 0.0, 1.0), any, detail::perturb(rng, truth, s));
  }
}

/// f-identity residuals, K vs K2 zero-set agreement (at M=2) and Phi round
/// trips on seeded fuzz points.
inline KformsCheckReport kforms_check(const KformsCheckOptions& opt = {}) {
  KformsCheckReport r;
  Engine rng(opt.seed);
  for (int L : opt.Ls) {
    if (L < 3) throw DomainError("kforms_check needs L >= 3");
    const std::size_t Ls = static_cast<std::size_t>(L);
    for (std::size_t i = 0; i < opt.samples; ++i) {
      const auto truth = random_truth(rng, Ls);
      const auto p = random_point_near_truth(rng, truth);
      std::vector<int> x(Ls - 1);
      for (int& v : x) v = static_cast<int>(uniform01(rng) * (opt.max_exponent + 1));
      const std::size_t j = 2 + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(L - 2));
      x[j - 1] = std::max(x[j - 1], 2);
      const double res = std::abs(f_identity_residual(x, j, p, truth));
      r.identity_worst = std::max(r.identity_worst, res);
      ++r.identity_points;

      const bool zero_k = K_exact(p, truth, 2) < opt.zero_threshold;
      const bool zero_k2 = K2(p, truth) < opt.zero_threshold;
      ++r.zero_set_points;
      if (zero_k != zero_k2) ++r.zero_set_disagreements;

      const auto canon = p.canonical();
      const auto u = phi1_inverse(canon, truth);
      const auto back = phi2(phi2_inverse(u));
      for (std::size_t l = 0; l + 1 < Ls; ++l)
        r.roundtrip_worst = std::max(r.roundtrip_worst, std::abs(back.gamma[l] - u.gamma[l]));
      const auto w = phi1(u, truth);
      for (std::size_t l = 0; l < Ls; ++l)
        r.roundtrip_worst = std::max({r.roundtrip_worst, std::abs(w.b[l] - canon.b[l]), std::abs(w.c[l] - canon.c[l])});
    }
  }
  r.identity_pass = r.identity_worst <= opt.residual_tolerance;
  r.zero_set_pass = r.zero_set_disagreements == 0;
  r.roundtrip_pass = r.roundtrip_worst <= 1e-14;
  return r;
}

}  // namespace rlctmix
