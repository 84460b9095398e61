#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <numeric>

#include "rlctmix/domain.hpp"
#include "rlctmix/io.hpp"

using namespace rlctmix;
using Catch::Approx;

namespace {

MixtureParams two_component(double a, std::vector<double> b1, std::vector<double> b2) {
  return MixtureParams({a, 1.0 - a}, {SimplexVector(std::move(b1)), SimplexVector(std::move(b2))});
}

// Independent brute force: all L-tuples in [0,M]^L summing to M.
std::size_t brute_force_count(int L, int M) {
  std::size_t count = 0;
  std::vector<int> v(static_cast<std::size_t>(L), 0);
  for (;;) {
    if (std::accumulate(v.begin(), v.end(), 0) == M) ++count;
    std::size_t k = 0;
    while (k < v.size() && ++v[k] > M) v[k++] = 0;
    if (k == v.size()) break;
  }
  return count;
}

}  // namespace

TEST_CASE("count vectors validate their invariants") {
  CHECK_NOTHROW(CountVector{2, 0, 1});
  CHECK_THROWS_AS(CountVector({1}), DimensionError);
  CHECK_THROWS_AS(CountVector({-1, 2}), DomainError);
  CHECK_THROWS_AS(CountVector({0, 0}), DomainError);
  CHECK(CountVector{2, 0, 1}.trials() == 3);
}

TEST_CASE("simplex vectors refuse to renormalize") {
  CHECK_NOTHROW(SimplexVector({0.25, 0.75}));
  CHECK_THROWS_AS(SimplexVector({0.5, 0.6}), DomainError);
  CHECK_THROWS_AS(SimplexVector({1.5, -0.5}), DomainError);
  CHECK_NOTHROW(SimplexVector({0.5, 0.5 + 5e-13}));
}

TEST_CASE("support enumeration") {
  SECTION("L=2, M=1 lists the two unit vectors") {
    const auto d = enumerate_support(2, 1);
    REQUIRE(d.size() == 2);
    CHECK(d[0] == CountVector{1, 0});
    CHECK(d[1] == CountVector{0, 1});
  }
  SECTION("colexicographic order and sizes") {
    const auto d = enumerate_support(3, 2);
    REQUIRE(d.size() == 6);
    const std::vector<CountVector> expected{{2, 0, 0}, {1, 1, 0}, {0, 2, 0}, {1, 0, 1}, {0, 1, 1}, {0, 0, 2}};
    CHECK(d == expected);
    CHECK(enumerate_support(3, 1).size() == 3);
  }
  SECTION("cardinality matches brute force") {
    for (int L = 2; L <= 5; ++L)
      for (int M = 1; M <= 5; ++M) {
        CHECK(support_size(L, M) == brute_force_count(L, M));
        CHECK(enumerate_support(L, M).size() == brute_force_count(L, M));
      }
  }
  SECTION("each point appears once") {
    const Support s(4, 3);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s.index_of(s[i]) == i);
  }
  SECTION("overflow is reported") { CHECK_THROWS_AS(support_size(200, 200), SizeError); }
}

TEST_CASE("multinomial pmf") {
  CHECK(multinomial_log_pmf(SimplexVector({1.0, 0.0}), CountVector{3, 0}) == 0.0);
  CHECK(multinomial_log_pmf(SimplexVector({1.0, 0.0}), CountVector{2, 1}) == -INFINITY);
  CHECK(multinomial_log_pmf(SimplexVector({0.5, 0.5}), CountVector{1, 1}) == Approx(std::log(0.5)));
  const auto u = SimplexVector::uniform(3);
  for (const auto& x : enumerate_support(3, 1)) CHECK(multinomial_log_pmf(u, x) == Approx(-std::log(3.0)));
  for (int L = 2; L <= 5; ++L)
    for (int M = 1; M <= 4; ++M) {
      std::vector<double> p(static_cast<std::size_t>(L));
      for (int l = 0; l < L; ++l) p[l] = (l + 1.0);
      const double total = std::accumulate(p.begin(), p.end(), 0.0);
      for (double& v : p) v /= total;
      double sum = 0.0;
      for (const auto& x : enumerate_support(L, M)) sum += std::exp(multinomial_log_pmf(SimplexVector(p), x));
      CHECK(sum == Approx(1.0).margin(1e-10));
    }
}

TEST_CASE("mixture pmf") {
  const SimplexVector b1({0.2, 0.3, 0.5});
  const SimplexVector b2({0.6, 0.1, 0.3});
  const Support d(3, 2);
  SECTION("degenerate mixtures reduce to one component") {
    const MixtureParams zero_weight({1.0, 0.0}, {b1, b2});
    const MixtureParams collapsed({0.5, 0.5}, {b1, b1});
    for (const auto& x : d) {
      CHECK(mixture_pmf(MixtureParams::single(b1), x) == Approx(multinomial_pmf(b1, x)));
      CHECK(mixture_pmf(zero_weight, x) == Approx(multinomial_pmf(b1, x)));
      CHECK(mixture_pmf(collapsed, x) == Approx(multinomial_pmf(b1, x)));
    }
  }
  SECTION("normalization and relabeling invariance") {
    for (int L = 2; L <= 5; ++L)
      for (int M = 1; M <= 4; ++M) {
        std::vector<double> p1(L), p2(L);
        for (int l = 0; l < L; ++l) {
          p1[l] = 1.0 + l;
          p2[l] = 1.0 + (L - l) * (L - l);
        }
        auto norm = [](std::vector<double>& v) {
          const double t = std::accumulate(v.begin(), v.end(), 0.0);
          for (double& e : v) e /= t;
        };
        norm(p1);
        norm(p2);
        const MixtureParams w({0.3, 0.7}, {SimplexVector(p1), SimplexVector(p2)});
        const MixtureParams swapped({0.7, 0.3}, {SimplexVector(p2), SimplexVector(p1)});
        double sum = 0.0;
        for (const auto& x : enumerate_support(L, M)) {
          sum += mixture_pmf(w, x);
          CHECK(mixture_pmf(w, x) == Approx(mixture_pmf(swapped, x)).epsilon(1e-14));
        }
        CHECK(sum == Approx(1.0).margin(1e-10));
      }
  }
}

TEST_CASE("sampling") {
  const auto truth = two_component(0.4, {0.7, 0.2, 0.1}, {0.1, 0.3, 0.6});
  CHECK(sample_dataset(truth, 2, 0, 1).size() == 0);
  SECTION("point mass") {
    const auto pm = MixtureParams::single(SimplexVector({1.0, 0.0, 0.0}));
    for (const auto& x : sample_dataset(pm, 3, 50, 7).observations) CHECK(x == CountVector{3, 0, 0});
  }
  SECTION("deterministic given the seed") {
    const auto a = sample_dataset(truth, 2, 100, 42);
    const auto b = sample_dataset(truth, 2, 100, 42);
    CHECK(a.observations == b.observations);
    CHECK(a.seed == 42);
    CHECK(a.truth.has_value());
  }
  SECTION("empirical frequencies converge") {
    const auto data = sample_dataset(truth, 2, 100000, 2024);
    const Support d(3, 2);
    std::vector<double> freq(d.size(), 0.0);
    for (const auto& x : data.observations) freq[d.index_of(x)] += 1.0 / 100000.0;
    double tv = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) tv += 0.5 * std::abs(freq[i] - mixture_pmf(truth, d[i]));
    CHECK(tv <= 0.02);
  }
}

TEST_CASE("kl divergence") {
  const auto q = MixtureParams::single(SimplexVector({0.5, 0.5}));
  const auto p = MixtureParams::single(SimplexVector({0.25, 0.75}));
  CHECK(kl_divergence(q, q, 1) == 0.0);
  CHECK(kl_divergence(q, p, 1) == Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)).epsilon(1e-12));
  CHECK(kl_divergence(q, p, 1) == Approx(0.14384).margin(1e-5));
  const SimplexVector bstar({0.2, 0.3, 0.5});
  const MixtureParams collapsed({0.37, 0.63}, {bstar, bstar});
  CHECK(kl_divergence(MixtureParams::single(bstar), collapsed, 3) == Approx(0.0).margin(1e-15));
  CHECK(kl_divergence(p, q, 4) > 0.0);

  const auto degenerate = MixtureParams::single(SimplexVector({1.0, 0.0}));
  try {
    (void)kl_divergence(q, degenerate, 1);
    FAIL("expected a divergence error");
  } catch (const DivergenceError& e) {
    CHECK(e.counts() == std::vector<int>{0, 1});
  }
}

TEST_CASE("entropy") {
  CHECK(entropy(MixtureParams::single(SimplexVector({1.0, 0.0, 0.0})), 3) == 0.0);
  CHECK(entropy(MixtureParams::single(SimplexVector::uniform(3)), 1) == Approx(std::log(3.0)));

  const auto truth = two_component(0.4, {0.7, 0.2, 0.1}, {0.1, 0.3, 0.6});
  const double s = entropy(truth, 2);
  double mean = 0.0, sq = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const double sn = empirical_entropy(truth, sample_dataset(truth, 2, 50, derive_seed(9, r)));
    mean += sn / reps;
    sq += sn * sn / reps;
  }
  const double se = std::sqrt((sq - mean * mean) / (reps - 1));
  CHECK(std::abs(mean - s) <= 3.0 * se);

  Dataset bad;
  bad.L = 2;
  bad.M = 1;
  bad.observations = {CountVector{0, 1}};
  CHECK_THROWS_AS(empirical_entropy(MixtureParams::single(SimplexVector({1.0, 0.0})), bad), DomainError);
}

TEST_CASE("dataset json round trip") {
  const auto truth = two_component(0.4, {0.7, 0.3}, {0.1, 0.9});
  const auto data = sample_dataset(truth, 3, 12, 5);
  const auto back = dataset_from_json(to_json(data));
  CHECK(back.observations == data.observations);
  CHECK(back.seed == data.seed);
  REQUIRE(back.truth.has_value());
  CHECK(back.truth->weights() == data.truth->weights());
  CHECK(Support(2, 3).csv_header() == "x_3_0,x_2_1,x_1_2,x_0_3");
}
