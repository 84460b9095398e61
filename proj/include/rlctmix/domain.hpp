#pragma once

// Multinomial distributions and mixtures over the finite support
//   D = { x in Z_{>=0}^L : x_1 + ... + x_L = M }.
// Probabilities are handled in the log domain; `mixture_pmf` exponentiates
// only at the API edge.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlctmix/error.hpp"
#include "rlctmix/numeric.hpp"
#include "rlctmix/random.hpp"

namespace rlctmix {

inline constexpr double kSimplexTolerance = 1e-12;

/// An element of D: L nonnegative counts summing to M.
class CountVector {
 public:
  CountVector() = default;

  explicit CountVector(std::vector<int> counts) : counts_(std::move(counts)) {
    if (counts_.size() < 2) throw DimensionError("CountVector needs L >= 2");
    long total = 0;
    for (int c : counts_) {
      if (c < 0) throw DomainError("CountVector entries must be nonnegative");
      total += c;
    }
    if (total < 1) throw DomainError("CountVector needs M >= 1");
    trials_ = static_cast<int>(total);
  }

  CountVector(std::initializer_list<int> counts) : CountVector(std::vector<int>(counts)) {}

  std::size_t size() const noexcept { return counts_.size(); }
  int trials() const noexcept { return trials_; }
  int operator[](std::size_t i) const { return counts_[i]; }
  const std::vector<int>& counts() const noexcept { return counts_; }
  std::span<const int> span() const noexcept { return counts_; }

  friend bool operator==(const CountVector&, const CountVector&) = default;

 private:
  std::vector<int> counts_;
  int trials_ = 0;
};

/// A probability vector b in the simplex B. Construction refuses (rather
/// than renormalizes) vectors off the simplex by more than 1e-12.
class SimplexVector {
 public:
  SimplexVector() = default;

  explicit SimplexVector(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw DimensionError("SimplexVector must be nonempty");
    double total = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0 && p <= 1.0)) throw DomainError("SimplexVector entries must lie in [0,1]");
      total += p;
    }
    if (std::abs(total - 1.0) > kSimplexTolerance)
      throw DomainError("SimplexVector entries must sum to 1 (tolerance 1e-12)");
  }

  SimplexVector(std::initializer_list<double> probs)
      : SimplexVector(std::vector<double>(probs)) {}

  /// Uniform vector of length L.
  static SimplexVector uniform(std::size_t L) {
    return SimplexVector(std::vector<double>(L, 1.0 / static_cast<double>(L)));
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  std::span<const double> span() const noexcept { return probs_; }

  friend bool operator==(const SimplexVector&, const SimplexVector&) = default;

 private:
  std::vector<double> probs_;
};

/// Parameter point w = (a, b_1..b_H) of an H-component multinomial mixture.
class MixtureParams {
 public:
  MixtureParams() = default;

  MixtureParams(std::vector<double> weights, std::vector<SimplexVector> components)
      : weights_(std::move(weights)), components_(std::move(components)) {
    if (weights_.empty()) throw DimensionError("MixtureParams needs H >= 1");
    if (weights_.size() != components_.size())
      throw DimensionError("MixtureParams: weights and components differ in length");
    const std::size_t L = components_.front().size();
    for (const auto& c : components_)
      if (c.size() != L) throw DimensionError("MixtureParams: components differ in L");
    double total = 0.0;
    for (double a : weights_) {
      if (!(a >= 0.0 && a <= 1.0)) throw DomainError("mixing weights must lie in [0,1]");
      total += a;
    }
    if (std::abs(total - 1.0) > kSimplexTolerance)
      throw DomainError("mixing weights must sum to 1 (tolerance 1e-12)");
  }

  /// A single multinomial Mul(b), i.e. H = 1.
  static MixtureParams single(SimplexVector b) { return MixtureParams({1.0}, {std::move(b)}); }

  std::size_t components_count() const noexcept { return weights_.size(); }
  std::size_t categories() const noexcept { return components_.front().size(); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<SimplexVector>& components() const noexcept { return components_; }
  double weight(std::size_t h) const { return weights_[h]; }
  const SimplexVector& component(std::size_t h) const { return components_[h]; }

  friend bool operator==(const MixtureParams&, const MixtureParams&) = default;

 private:
  std::vector<double> weights_;
  std::vector<SimplexVector> components_;
};

/// An ordered sample X^1..X^n plus provenance.
struct Dataset {
  int L = 0;
  int M = 0;
  std::vector<CountVector> observations;
  std::optional<MixtureParams> truth;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return observations.size(); }

  void validate() const {
    if (L < 2 || M < 1) throw DimensionError("Dataset needs L >= 2 and M >= 1");
    for (const auto& x : observations)
      if (static_cast<int>(x.size()) != L || x.trials() != M)
        throw DimensionError("Dataset observations must share L and M");
    if (truth && static_cast<int>(truth->categories()) != L)
      throw DimensionError("Dataset truth has the wrong L");
  }

  /// Copy with one extra observation appended.
  Dataset with(const CountVector& x) const {
    Dataset out = *this;
    out.observations.push_back(x);
    return out;
  }

  /// Copy restricted to the first k observations.
  Dataset prefix(std::size_t k) const {
    Dataset out = *this;
    out.observations.resize(std::min(k, observations.size()));
    return out;
  }
};

// ---------------------------------------------------------------------------
// Support enumeration

/// |D| = binomial(M+L-1, L-1), with an explicit overflow check.
inline std::size_t support_size(int L, int M) {
  if (L < 2 || M < 1) throw DomainError("support needs L >= 2 and M >= 1");
  // binomial(M+L-1, k) with k = min(L-1, M), built incrementally; each partial
  // product is itself a binomial coefficient so the division is exact.
  const std::uint64_t n = static_cast<std::uint64_t>(M) + static_cast<std::uint64_t>(L) - 1;
  const std::uint64_t k = std::min<std::uint64_t>(L - 1, M);
  std::uint64_t acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // acc * (n-k+i) / i, split so the product cannot wrap.
    const std::uint64_t g = std::gcd(acc, i);
    const std::uint64_t num = (n - k + i) / (i / g);
    if (acc / g > std::numeric_limits<std::uint64_t>::max() / num)
      throw SizeError("support cardinality overflows the index type");
    acc = acc / g * num;
  }
  return static_cast<std::size_t>(acc);
}

namespace detail {
inline void enumerate_rec(std::vector<int>& cur, int pos, int remaining,
                          std::vector<CountVector>& out) {
  if (pos == 0) {
    cur[0] = remaining;
    out.emplace_back(cur);
    return;
  }
  // Last coordinates vary slowest: ascending x_pos gives colexicographic order.
  for (int v = 0; v <= remaining; ++v) {
    cur[pos] = v;
    enumerate_rec(cur, pos - 1, remaining - v, out);
  }
  cur[pos] = 0;
}
}  // namespace detail

/// All elements of D exactly once, in colexicographic order of the counts
/// (compare x_L first, then x_{L-1}, ...). This order is canonical for every
/// per-x table the library writes.
inline std::vector<CountVector> enumerate_support(int L, int M) {
  const std::size_t n = support_size(L, M);
  std::vector<CountVector> out;
  out.reserve(n);
  std::vector<int> cur(static_cast<std::size_t>(L), 0);
  detail::enumerate_rec(cur, L - 1, M, out);
  return out;
}

/// D with an index lookup.
class Support {
 public:
  Support(int L, int M) : L_(L), M_(M), points_(enumerate_support(L, M)) {
    for (std::size_t i = 0; i < points_.size(); ++i) index_.emplace(points_[i].counts(), i);
  }

  int L() const noexcept { return L_; }
  int M() const noexcept { return M_; }
  std::size_t size() const noexcept { return points_.size(); }
  const CountVector& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<CountVector>& points() const noexcept { return points_; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  std::size_t index_of(const CountVector& x) const {
    auto it = index_.find(x.counts());
    if (it == index_.end()) throw DimensionError("point is not in the support D");
    return it->second;
  }

  /// CSV header naming each support point, e.g. "x_2_0_0,x_1_1_0,...".
  std::string csv_header() const {
    std::string out;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (i) out += ',';
      out += 'x';
      for (int c : points_[i].counts()) out += '_' + std::to_string(c);
    }
    return out;
  }

 private:
  int L_;
  int M_;
  std::vector<CountVector> points_;
  std::map<std::vector<int>, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Probabilities

/// log(M! / prod x_l!)
inline double log_multinomial_coefficient(const CountVector& x) {
  double v = log_factorial(x.trials());
  for (int c : x.counts()) v -= log_factorial(c);
  return v;
}

/// log Mul_L(x | b), with 0^0 = 1 and 0! = 1. Exactly -inf when some b_l = 0
/// while x_l > 0.
inline double multinomial_log_pmf(const SimplexVector& b, const CountVector& x) {
  if (b.size() != x.size()) throw DimensionError("multinomial_log_pmf: L mismatch");
  double v = log_multinomial_coefficient(x);
  for (std::size_t l = 0; l < x.size(); ++l) {
    if (x[l] == 0) continue;
    if (b[l] == 0.0) return kNegInf;
    v += x[l] * std::log(b[l]);
  }
  return v;
}

inline double multinomial_pmf(const SimplexVector& b, const CountVector& x) {
  return std::exp(multinomial_log_pmf(b, x));
}

/// log p(x|w) = log sum_h a_h Mul(x|b_h), via log-sum-exp.
inline double mixture_log_pmf(const MixtureParams& w, const CountVector& x) {
  if (w.categories() != x.size()) throw DimensionError("mixture_pmf: L mismatch");
  std::vector<double> terms;
  terms.reserve(w.components_count());
  for (std::size_t h = 0; h < w.components_count(); ++h) {
    if (w.weight(h) == 0.0) continue;
    terms.push_back(std::log(w.weight(h)) + multinomial_log_pmf(w.component(h), x));
  }
  return log_sum_exp(terms);
}

inline double mixture_pmf(const MixtureParams& w, const CountVector& x) {
  return std::exp(mixture_log_pmf(w, x));
}

/// log p(x|w) for every x of D, in support order.
inline std::vector<double> mixture_log_pmf_table(const MixtureParams& w, const Support& d) {
  std::vector<double> out;
  out.reserve(d.size());
  for (const auto& x : d) out.push_back(mixture_log_pmf(w, x));
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

/// One draw from Mul_L(.|b) with M trials.
inline CountVector sample_multinomial(Engine& rng, const SimplexVector& b, int M) {
  std::vector<int> counts(b.size(), 0);
  for (int t = 0; t < M; ++t) ++counts[categorical(rng, b.span())];
  return CountVector(std::move(counts));
}

/// n i.i.d. draws from the mixture; deterministic in `seed`.
inline Dataset sample_dataset(const MixtureParams& truth, int M, std::size_t n,
                              std::uint64_t seed) {
  if (M < 1) throw DomainError("sample_dataset: M must be >= 1");
  Dataset d;
  d.L = static_cast<int>(truth.categories());
  d.M = M;
  d.truth = truth;
  d.seed = seed;
  Engine rng(seed);
  d.observations.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t h = categorical(rng, truth.weights());
    d.observations.push_back(sample_multinomial(rng, truth.component(h), M));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Information quantities

namespace detail {
/// sum_x q(x) log(q(x)/p(x)) from two log tables, written as
/// sum_x q(x) (expm1(d) - d) with d = log p - log q. Each term is
/// nonnegative, and the form stays accurate when p and q nearly agree.
inline double kl_from_logs(std::span<const double> log_q, std::span<const double> log_p,
                           const Support& support) {
  double total = 0.0;
  for (std::size_t i = 0; i < log_q.size(); ++i) {
    if (log_q[i] == kNegInf) continue;
    if (log_p[i] == kNegInf)
      throw DivergenceError("kl_divergence: q(x) > 0 but p(x) = 0", support[i].counts());
    const double d = log_p[i] - log_q[i];
    total += std::exp(log_q[i]) * (std::expm1(d) - d);
  }
  return total;
}
}  // namespace detail

/// KL(q || p) as an exact finite sum over D.
inline double kl_divergence(const MixtureParams& q, const MixtureParams& p, int M) {
  if (q.categories() != p.categories()) throw DimensionError("kl_divergence: L mismatch");
  const Support d(static_cast<int>(q.categories()), M);
  const auto lq = mixture_log_pmf_table(q, d);
  const auto lp = mixture_log_pmf_table(p, d);
  return detail::kl_from_logs(lq, lp, d);
}

/// S = -sum_x q(x) log q(x).
inline double entropy(const MixtureParams& q, int M) {
  const Support d(static_cast<int>(q.categories()), M);
  double s = 0.0;
  for (const auto& x : d) {
    const double lq = mixture_log_pmf(q, x);
    if (lq != kNegInf) s -= std::exp(lq) * lq;
  }
  return s;
}

/// S_n = -(1/n) sum_i log q(X_i). Zero for an empty dataset.
inline double empirical_entropy(const MixtureParams& q, const Dataset& data) {
  if (data.observations.empty()) return 0.0;
  double s = 0.0;
  for (const auto& x : data.observations) {
    const double lq = mixture_log_pmf(q, x);
    if (lq == kNegInf)
      throw DomainError("empirical_entropy: observation has zero probability under q");
    s -= lq;
  }
  return s / static_cast<double>(data.observations.size());
}

}  // namespace rlctmix
