#include <catch_amalgamated.hpp>

#include <cmath>

#include "rlctmix/exact_bayes.hpp"

using namespace rlctmix;
using Catch::Approx;

namespace {

Dataset make_dataset(int L, int M, std::vector<CountVector> obs) {
  Dataset d;
  d.L = L;
  d.M = M;
  d.observations = std::move(obs);
  return d;
}

MixtureParams truth_232() {
  return MixtureParams({0.35, 0.65}, {SimplexVector({0.6, 0.3, 0.1}), SimplexVector({0.2, 0.3, 0.5})});
}

// Oracle written directly from the Beta/Dirichlet integral, visiting the
// assignments in plain base-H order.
double brute_force_free_energy(const Dataset& d, int H, const ConjugatePrior& p) {
  const std::size_t n = d.size();
  const std::size_t L = static_cast<std::size_t>(d.L);
  std::vector<int> z(n, 0);
  std::vector<double> terms;
  for (;;) {
    std::vector<double> alpha = p.alpha;
    auto beta = p.beta;
    for (std::size_t i = 0; i < n; ++i) {
      alpha[z[i]] += 1.0;
      for (std::size_t l = 0; l < L; ++l) beta[z[i]][l] += d.observations[i][l];
    }
    double v = log_normalizer(p) - log_normalizer(alpha, beta);
    for (const auto& x : d.observations) v += log_multinomial_coefficient(x);
    terms.push_back(v);
    std::size_t k = 0;
    while (k < n && ++z[k] == H) z[k++] = 0;
    if (k == n) break;
  }
  return -log_sum_exp(terms);
}

}  // namespace

TEST_CASE("log normalizer") {
  CHECK(log_normalizer({1.0}, {{1.0, 1.0}}) == Approx(0.0).margin(1e-15));
  const double a = 0.7, b = 1.3;
  const int H = 3, L = 4;
  const auto p = ConjugatePrior::symmetric(H, L, a, b);
  const double mixing = std::lgamma(H * a) - H * std::lgamma(a);
  CHECK(log_normalizer(p) == Approx(H * (std::lgamma(L * b) - L * std::lgamma(b)) + mixing));
  CHECK_THROWS_AS(log_normalizer({1.0}, {{1.0, 0.0}}), DomainError);

  // exp(log R) is the reciprocal of the unnormalized prior mass.
  const double b1 = 2.0, b2 = 3.5;
  double mass = 0.0;
  const int grid = 200;
  for (int i = 0; i < grid; ++i) {
    const double u = (i + 0.5) / grid;
    mass += std::pow(u, b1 - 1) * std::pow(1 - u, b2 - 1) / grid;
  }
  CHECK(std::exp(log_normalizer({1.0}, {{b1, b2}})) == Approx(1.0 / mass).epsilon(1e-4));
}

TEST_CASE("enumeration base cases") {
  const auto p = ConjugatePrior::symmetric(2, 3, 1.0, 1.0);
  CHECK(log_marginal_enumeration(make_dataset(3, 2, {}), 2, p).value == 0.0);
  for (int H = 1; H <= 4; ++H)
    for (int L = 2; L <= 4; ++L) {
      const auto sp = ConjugatePrior::symmetric(H, L, 0.6, 1.7);
      std::vector<int> c(static_cast<std::size_t>(L), 0);
      c[1] = 1;
      const auto f = log_marginal_enumeration(make_dataset(L, 1, {CountVector(c)}), H, sp);
      CHECK(f.value == Approx(std::log(static_cast<double>(L))).epsilon(1e-12));
      CHECK(f.method == FreeEnergyMethod::enumeration);
      CHECK(f.n == 1);
    }
}

TEST_CASE("enumeration matches an independent brute-force sum") {
  const auto truth = truth_232();
  for (int H = 1; H <= 3; ++H) {
    ConjugatePrior p = ConjugatePrior::symmetric(H, 3, 0.5, 1.0);
    for (int h = 0; h < H; ++h) {
      p.alpha[h] = 0.4 + 0.3 * h;
      p.beta[h] = {0.8 + 0.1 * h, 1.5, 0.6 + 0.5 * h};
    }
    const auto d = sample_dataset(truth, 2, 7, 11 + H);
    CHECK(log_marginal_enumeration(d, H, p).value == Approx(brute_force_free_energy(d, H, p)).epsilon(1e-12));
  }
}

TEST_CASE("enumeration invariances and reproducibility") {
  const auto d = sample_dataset(truth_232(), 2, 10, 3);
  const auto p = ConjugatePrior::symmetric(2, 3, 0.8, 1.2);
  const double f = log_marginal_enumeration(d, 2, p).value;

  SECTION("exchangeable in the observations") {
    Dataset r = d;
    std::reverse(r.observations.begin(), r.observations.end());
    CHECK(std::abs(log_marginal_enumeration(r, 2, p).value - f) <= 1e-12 * std::max(1.0, std::abs(f)));
  }
  SECTION("relabeling components leaves F unchanged") {
    ConjugatePrior q = ConjugatePrior::symmetric(2, 3, 0.8, 1.2);
    q.alpha = {0.5, 1.5};
    q.beta = {{1.0, 2.0, 0.5}, {0.7, 0.7, 3.0}};
    const double f1 = log_marginal_enumeration(d, 2, q).value;
    const double f2 = log_marginal_enumeration(d, 2, q.permuted({1, 0})).value;
    CHECK(std::abs(f1 - f2) <= 1e-12 * std::max(1.0, std::abs(f1)));
  }
  SECTION("blocks agree, and a fixed block count is bitwise reproducible") {
    EnumerationOptions one{22, 4, 1};
    EnumerationOptions many{22, 4, 3};
    const double a = log_marginal_enumeration(d, 2, p, one).value;
    const double b = log_marginal_enumeration(d, 2, p, many).value;
    CHECK(a == b);
    CHECK(a == Approx(f).epsilon(1e-13));
    EnumerationOptions odd{22, 7, 2};
    CHECK(log_marginal_enumeration(d, 2, p, odd).value == Approx(f).epsilon(1e-13));
  }
  SECTION("cap and dimension errors") {
    EnumerationOptions small{5, 1, 1};
    CHECK_THROWS_AS(log_marginal_enumeration(d, 2, p, small), SizeError);
    CHECK_THROWS_AS(log_marginal_enumeration(d, 3, p), DimensionError);
    CHECK_THROWS_AS(log_marginal_enumeration(d, 2, ConjugatePrior::symmetric(2, 4, 1, 1)), DimensionError);
  }
}

TEST_CASE("assignment posterior") {
  const auto d = sample_dataset(truth_232(), 2, 6, 8);
  const auto p = ConjugatePrior::symmetric(2, 3, 1.0, 1.0);
  const auto post = assignment_posterior(d, 2, p);
  REQUIRE(post.size() == 64);
  double total = 0.0;
  for (double v : post) total += v;
  CHECK(total == Approx(1.0).epsilon(1e-12));
  const double f = log_marginal_enumeration(d, 2, p).value;
  for (std::uint64_t idx : {0ULL, 5ULL, 37ULL, 63ULL}) {
    std::vector<int> z(6);
    for (int i = 0; i < 6; ++i) z[i] = (idx >> i) & 1;
    CHECK(post[idx] == Approx(std::exp(log_assignment_weight(d, 2, p, z) + f)).epsilon(1e-10));
  }
}

TEST_CASE("quadrature oracle") {
  const auto p = ConjugatePrior::symmetric(2, 2, 1.0, 1.0);
  CHECK(std::abs(log_marginal_quadrature(make_dataset(2, 1, {}), 2, p, 50).value) <= 1e-6);

  const auto d = make_dataset(2, 1, {{1, 0}, {0, 1}, {1, 0}});
  const double exact = log_marginal_enumeration(d, 2, p).value;
  const auto q = log_marginal_quadrature(d, 2, p, 400);
  CHECK(q.method == FreeEnergyMethod::quadrature);
  CHECK(std::abs(q.value - exact) <= 1e-3);

  SECTION("error shrinks as the grid doubles") {
    const auto pb = ConjugatePrior::symmetric(2, 2, 1.5, 2.0);
    const auto d2 = make_dataset(2, 1, {{1, 0}, {1, 0}, {0, 1}, {1, 0}});
    const double e = log_marginal_enumeration(d2, 2, pb).value;
    double prev = INFINITY;
    for (int g : {10, 20, 40, 80}) {
      const double err = std::abs(log_marginal_quadrature(d2, 2, pb, g).value - e);
      CHECK(err < prev);
      prev = err;
    }
  }
  SECTION("restrictions") {
    CHECK_THROWS_AS(log_marginal_quadrature(d, 2, ConjugatePrior::symmetric(2, 2, 0.5, 1.0), 10), DomainError);
    const auto big = make_dataset(3, 1, {{1, 0, 0}});
    CHECK_THROWS_AS(log_marginal_quadrature(big, 2, ConjugatePrior::symmetric(2, 3, 1, 1), 10), DimensionError);
  }
}

TEST_CASE("predictive distribution") {
  SECTION("prior predictive under a symmetric prior") {
    const auto p = ConjugatePrior::symmetric(2, 4, 0.7, 1.3);
    const auto empty = make_dataset(4, 1, {});
    for (const auto& x : Support(4, 1)) CHECK(predictive_pmf(empty, 2, p, x) == Approx(0.25).epsilon(1e-12));
    const auto uniform = MixtureParams::single(SimplexVector::uniform(4));
    CHECK(gen_error_exact(empty, uniform, 2, p) == Approx(0.0).margin(1e-14));
  }
  SECTION("normalized, positive, and equal to the Z ratio") {
    const auto d = sample_dataset(truth_232(), 2, 6, 19);
    const auto p = ConjugatePrior::symmetric(2, 3, 0.5, 1.0);
    const Support s(3, 2);
    const auto vec = predictive_distribution(d, 2, p);
    double total = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double ratio = predictive_pmf(d, 2, p, s[k]);
      CHECK(ratio > 0.0);
      CHECK(vec[k] == Approx(ratio).epsilon(1e-10));
      total += ratio;
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("generalization error identity") {
  const auto truth = truth_232();
  const auto p = ConjugatePrior::symmetric(2, 3, 1.0, 1.0);
  for (int r = 0; r < 5; ++r) {
    const auto d = sample_dataset(truth, 2, 8, derive_seed(77, r));
    const double g = gen_error_exact(d, truth, 2, p);
    CHECK(g >= 0.0);
    CHECK(std::abs(g - gen_error_via_free_energy(d, truth, 2, p)) <= 1e-9);
  }
  const auto degenerate = MixtureParams::single(SimplexVector({1.0, 0.0, 0.0}));
  CHECK_THROWS_AS(gen_error_exact(sample_dataset(truth, 2, 3, 1), degenerate, 2, p), DomainError);
}
