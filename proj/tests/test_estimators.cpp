#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "rlctmix/free_energy_mc.hpp"
#include "rlctmix/gibbs.hpp"
#include "rlctmix/regression.hpp"
#include "rlctmix/rlct.hpp"
#include "rlctmix/volume_scaling.hpp"

using namespace rlctmix;
using Catch::Approx;

namespace {

const MixtureParams kSingle = MixtureParams::single(SimplexVector({0.2, 0.3, 0.5}));

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

double assignment_tv(const GibbsSamples& s, const std::vector<double>& exact) {
  std::vector<double> emp(exact.size(), 0.0);
  for (const auto& z : s.assignments) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < z.size(); ++i) idx += static_cast<std::size_t>(z[i]) << i;
    emp[idx] += 1.0 / static_cast<double>(s.assignments.size());
  }
  double tv = 0.0;
  for (std::size_t k = 0; k < exact.size(); ++k) tv += 0.5 * std::abs(emp[k] - exact[k]);
  return tv;
}

}  // namespace

TEST_CASE("gibbs configuration is validated") {
  CHECK_THROWS_AS((GibbsConfig{100, 100, 1, 1, 1.0}.validate()), DomainError);
  CHECK_THROWS_AS((GibbsConfig{100, 10, 0, 1, 1.0}.validate()), DomainError);
  CHECK_NOTHROW(GibbsConfig{100, 10, 1, 1, 1.0}.validate());
}

TEST_CASE("gibbs with no data draws from the prior") {
  Dataset empty;
  empty.L = 3;
  empty.M = 2;
  const auto prior = ConjugatePrior::symmetric(2, 3, 2.0, 3.0);
  const auto s = gibbs_posterior(empty, 2, prior, {20000, 100, 1, 5, 1.0});
  double mean_a = 0.0, mean_b = 0.0;
  for (const auto& w : s.params) {
    mean_a += w.weight(0) / s.params.size();
    mean_b += w.component(1)[2] / s.params.size();
  }
  CHECK(mean_a == Approx(0.5).margin(0.01));
  CHECK(mean_b == Approx(1.0 / 3.0).margin(0.01));
}

TEST_CASE("gibbs with one component matches the conjugate posterior") {
  const auto d = sample_dataset(kSingle, 2, 30, 4);
  ConjugatePrior prior = ConjugatePrior::symmetric(1, 3, 1.0, 1.0);
  prior.beta[0] = {0.5, 1.5, 2.0};
  const auto s = gibbs_posterior(d, 1, prior, {10100, 100, 1, 9, 1.0});
  std::vector<double> conc = prior.beta[0];
  for (const auto& x : d.observations)
    for (int l = 0; l < 3; ++l) conc[l] += x[l];
  Engine rng(99);
  std::vector<double> direct, sampled;
  for (const auto& w : s.params) sampled.push_back(w.component(0)[0]);
  for (std::size_t k = 0; k < sampled.size(); ++k) direct.push_back(dirichlet_draw(rng, conc)[0]);
  CHECK(ks_two_sample(sampled, direct) < 0.05);
  for (const auto& z : s.assignments) CHECK(std::all_of(z.begin(), z.end(), [](int v) { return v == 0; }));
}

TEST_CASE("gibbs assignment distribution matches the exact posterior") {
  const auto truth = MixtureParams({0.5, 0.5}, {SimplexVector({0.8, 0.2}), SimplexVector({0.3, 0.7})});
  const auto prior = ConjugatePrior::symmetric(2, 2, 1.0, 1.0);
  SECTION("n = 8, 1e5 sweeps") {
    const auto d = sample_dataset(truth, 1, 8, 21);
    const auto s = gibbs_posterior(d, 2, prior, {101000, 1000, 1, 3, 1.0});
    CHECK(assignment_tv(s, assignment_posterior(d, 2, prior)) <= 0.05);
  }
  SECTION("n = 6: TV shrinks as sweeps grow fourfold") {
    const auto d = sample_dataset(truth, 1, 6, 22);
    const auto exact = assignment_posterior(d, 2, prior);
    double prev = 1.0;
    for (std::size_t sweeps : {6250u, 25000u, 100000u}) {
      const double tv = assignment_tv(gibbs_posterior(d, 2, prior, {sweeps + 1000, 1000, 1, 8, 1.0}), exact);
      CHECK(tv < prev);
      prev = tv;
    }
    CHECK(prev <= 0.05);
  }
  SECTION("deterministic given the seed") {
    const auto d = sample_dataset(truth, 1, 5, 23);
    const auto a = gibbs_posterior(d, 2, prior, {600, 100, 1, 4, 1.0});
    const auto b = gibbs_posterior(d, 2, prior, {600, 100, 1, 4, 1.0});
    CHECK(a.assignments == b.assignments);
    CHECK(a.energies == b.energies);
  }
}

TEST_CASE("chain diagnostics") {
  Engine rng(1);
  std::vector<double> iid(10000);
  for (double& v : iid) v = standard_normal(rng);
  CHECK(batch_means_se(iid) == Approx(0.01).margin(0.003));
  CHECK(split_rhat(iid) < 1.01);
  std::vector<double> drift(10000);
  for (std::size_t i = 0; i < drift.size(); ++i) drift[i] = iid[i] + (i < 5000 ? 0.0 : 3.0);
  CHECK(split_rhat(drift) > kRhatThreshold);
}

TEST_CASE("wbic") {
  const auto prior1 = ConjugatePrior::symmetric(1, 3, 1.0, 1.0);
  SECTION("regular one-component model against the closed form") {
    const auto d = sample_dataset(kSingle, 2, 50, 31);
    const double exact = log_marginal_enumeration(d, 1, prior1, {1000, 1, 1}).value;
    const auto w = wbic_estimate(d, 1, prior1, {100000, 5000, 1, 2, 1.0});
    CHECK(w.method == FreeEnergyMethod::wbic);
    CHECK(std::abs(w.value - exact) <= std::max(1.0, 3.0 * w.standard_error));
    CHECK_FALSE(w.mixing_warning);
  }
  SECTION("two components against enumeration at n = 16") {
    const auto prior = ConjugatePrior::symmetric(2, 3, 1.0, 1.0);
    const auto d = sample_dataset(kSingle, 2, 16, 32);
    const double exact = log_marginal_enumeration(d, 2, prior).value;
    const auto w = wbic_estimate(d, 2, prior, {100000, 5000, 1, 3, 1.0});
    CHECK(std::abs(w.value - exact) <= std::max(1.0, 3.0 * w.standard_error));
  }
  SECTION("standard error shrinks like 1/sqrt(sweeps)") {
    const auto d = sample_dataset(kSingle, 2, 40, 33);
    const auto a = wbic_estimate(d, 1, prior1, {50000, 5000, 1, 4, 1.0});
    const auto b = wbic_estimate(d, 1, prior1, {95000, 5000, 1, 4, 1.0});
    const double ratio = a.standard_error / b.standard_error;
    CHECK(ratio >= std::sqrt(2.0) / 1.6);
    CHECK(ratio <= std::sqrt(2.0) * 1.6);
  }
  SECTION("n < 3 is rejected") {
    CHECK_THROWS_AS(wbic_estimate(sample_dataset(kSingle, 2, 2, 1), 1, prior1, {}), DomainError);
  }
}

TEST_CASE("thermodynamic integration") {
  const auto prior = ConjugatePrior::symmetric(2, 3, 1.0, 1.0);
  const auto d = sample_dataset(kSingle, 2, 12, 41);
  const double exact = log_marginal_enumeration(d, 2, prior).value;
  SECTION("21-rung ladder matches enumeration") {
    const auto t = thermo_integration(d, 2, prior, power_ladder(21), {20000, 2000, 1, 5, 1.0});
    CHECK(t.method == FreeEnergyMethod::thermo);
    CHECK(std::abs(t.value - exact) <= 3.0 * t.standard_error);
  }
  SECTION("two-point ladder is flagged and biased upward") {
    const auto r = thermo_integration_detailed(d, 2, prior, {0.0, 1.0}, {20000, 2000, 1, 5, 1.0}, false);
    CHECK(r.degenerate_ladder);
    CHECK(r.value.value > exact + 1.0);
  }
  SECTION("one component against the closed form") {
    const auto prior1 = ConjugatePrior::symmetric(1, 3, 1.0, 1.0);
    const auto d1 = sample_dataset(kSingle, 2, 40, 42);
    const double e1 = log_marginal_enumeration(d1, 1, prior1, {1000, 1, 1}).value;
    const auto t = thermo_integration(d1, 1, prior1, power_ladder(21), {20000, 2000, 1, 6, 1.0});
    CHECK(std::abs(t.value - e1) <= 3.0 * t.standard_error);
  }
  SECTION("agrees with WBIC within the WBIC tolerance") {
    const auto t = thermo_integration(d, 2, prior, power_ladder(21), {20000, 2000, 1, 7, 1.0});
    const auto w = wbic_estimate(d, 2, prior, {100000, 5000, 1, 7, 1.0});
    const double se = std::hypot(t.standard_error, w.standard_error);
    CHECK(std::abs(t.value - w.value) <= std::max(1.0, 3.0 * se));
  }
  SECTION("ladder validation") {
    CHECK_THROWS_AS(thermo_integration(d, 2, prior, {0.1, 1.0}, {}), DomainError);
    CHECK_THROWS_AS(thermo_integration(d, 2, prior, {0.0, 0.5, 0.5, 1.0}, {}), DomainError);
    const auto lad = power_ladder(5);
    CHECK(lad.front() == 0.0);
    CHECK(lad.back() == 1.0);
    CHECK(lad[2] == Approx(std::pow(0.5, 5)));
  }
}

TEST_CASE("slope fit") {
  std::vector<SlopeRecord> exact;
  for (int n : {6, 8, 10, 12}) exact.push_back({double(n), 1.5 * std::log(double(n))});
  const auto f = slope_fit(exact);
  CHECK(std::abs(f.lambda_hat - 1.5) <= 1e-12);
  CHECK(std::abs(f.intercept) <= 1e-12);

  const RlctReport r{1.25, 1, RlctSource::main_theorem_dirichlet, true};
  const double S = 0.9;
  std::vector<SlopeRecord> pred;
  for (int n = 10; n <= 1000; n *= 2) pred.push_back({double(n), predict_free_energy(r, n, S) - n * S});
  CHECK(std::abs(slope_fit(pred).lambda_hat - 1.25) <= 1e-6);

  const RlctReport r2{1.5, 2, RlctSource::matsuda, true};
  std::vector<SlopeRecord> pred2;
  for (int n = 10; n <= 1000; n *= 2) pred2.push_back({double(n), predict_free_energy(r2, n, S) - n * S + 0.3});
  const auto f2 = slope_fit(pred2, {}, 2);
  CHECK(std::abs(f2.lambda_hat - 1.5) <= 1e-9);
  CHECK(f2.intercept == Approx(0.3));

  // The projection weights reproduce the slope.
  double via = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) via += f.projection[k] * exact[k].y;
  CHECK(via == Approx(f.lambda_hat));

  CHECK_THROWS_AS(slope_fit({{5, 1.0}, {6, 2.0}}), RankError);
  CHECK_THROWS_AS(slope_fit({{5, 1.0}, {5, 2.0}, {6, 2.0}}), RankError);
}

TEST_CASE("volume scaling") {
  VolumeScalingConfig cfg;
  cfg.thresholds = VolumeScalingConfig::geometric(4.0, 1e-16);
  cfg.samples_per_level = 20000;
  SECTION("w^2 on [0,1]") {
    const auto r = volume_scaling_lambda(toy_square_problem(), cfg);
    CHECK(r.lambda_hat >= 0.45);
    CHECK(r.lambda_hat <= 0.55);
    CHECK(r.m_hat == 1);
  }
  SECTION("K3 with L = 3") {
    const auto r = volume_scaling_lambda(k3_problem(3), cfg);
    CHECK(r.lambda_hat >= 1.35);
    CHECK(r.lambda_hat <= 1.65);
    CHECK(r.m_hat == 2);
    for (const auto& lv : r.levels) CHECK(lv.survival > 0.0);
  }
  SECTION("scaling the loss leaves lambda unchanged") {
    auto scaled = k3_problem(3);
    const auto base = scaled.loss;
    scaled.loss = [base](std::span<const double> v) { return 4.0 * base(v); };
    cfg.seed = 3;
    const auto a = volume_scaling_lambda(k3_problem(3), cfg);
    const auto b = volume_scaling_lambda(scaled, cfg);
    CHECK(std::abs(a.lambda_hat - b.lambda_hat) <= std::hypot(a.stderr, b.stderr));
  }
  SECTION("full mixture loss") {
    VolumeScalingConfig small;
    small.thresholds = VolumeScalingConfig::geometric(1.0, 1e-12);
    small.samples_per_level = 3000;
    const auto r = volume_scaling_lambda(mixture_kl_problem(SimplexVector({0.2, 0.3, 0.5}), 2), small);
    CHECK(r.lambda_hat >= 1.3);
    CHECK(r.lambda_hat <= 1.7);
  }
  SECTION("starvation names the level") {
    VolumeProblem never{"never", [](std::span<const double>) { return 1.0; }, BoxPrior{{0.0}, {1.0}, {}, {}}};
    VolumeScalingConfig c;
    c.thresholds = {2.0, 0.5, 0.25};
    c.samples_per_level = 100;
    try {
      (void)volume_scaling_lambda(never, c);
      FAIL("expected starvation");
    } catch (const StarvationError& e) {
      CHECK(e.level() == 1);
    }
  }
  SECTION("thresholds must decrease") {
    VolumeScalingConfig c;
    c.thresholds = {1.0, 1.0};
    CHECK_THROWS_AS(volume_scaling_lambda(toy_square_problem(), c), DomainError);
  }
}
