// rlctmix command line: thin wrappers around the library, JSON/CSV on stdout.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "rlctmix/rlctmix.hpp"

using namespace rlctmix;

namespace {

Json report_json(const RlctReport& r) {
  return {{"lambda", r.lambda}, {"multiplicity", r.multiplicity}, {"source", to_string(r.source)},
          {"is_exact", r.is_exact}};
}

ConjugatePrior prior_for(const Dataset& d, int H, double alpha, double beta) {
  return ConjugatePrior::symmetric(H, d.L, alpha, beta);
}

void write_csv_row(std::ostream& os, std::initializer_list<std::string> cells) {
  bool first = true;
  for (const auto& c : cells) {
    if (!first) os << ',';
    os << c;
    first = false;
  }
  os << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free energy, RLCT and generalization error tools for multinomial mixtures"};
  app.require_subcommand(1);
  int exit_code = 0;

  // rlct
  auto* rlct = app.add_subcommand("rlct", "RLCT of a two-component multinomial mixture");
  int r_L = 3;
  std::string r_prior = "bounded";
  double r_alpha = 1.0;
  rlct->add_option("--L", r_L, "number of categories")->required();
  rlct->add_option("--prior", r_prior, "mixing-ratio prior")->check(CLI::IsMember({"bounded", "dirichlet"}));
  rlct->add_option("--alpha", r_alpha, "Dirichlet hyperparameter");
  rlct->callback([&] {
    const auto spec = r_prior == "bounded" ? PriorSpec::bounded() : PriorSpec::dirichlet(r_alpha);
    std::cout << report_json(rlct_two_component(r_L, spec)).dump(2) << '\n';
  });

  // rlct-binomial
  auto* binom = app.add_subcommand("rlct-binomial", "Upper bound on the RLCT of a binomial mixture");
  BinomialMixtureSpec b;
  double b_alpha = 1.0, b_beta = 1.0;
  binom->add_option("--M", b.M, "trials")->required();
  binom->add_option("--H", b.H, "model components")->required();
  binom->add_option("--H0", b.H0, "true components")->required();
  binom->add_option("--H1", b.H1, "probabilistic true components")->required();
  binom->add_option("--H2", b.H2, "deterministic true components")->required();
  binom->add_option("--alpha", b_alpha, "mixing-ratio hyperparameter");
  binom->add_option("--beta", b_beta, "component hyperparameter");
  binom->callback([&] {
    b.alpha = b_alpha;
    b.beta = b_beta;
    std::cout << report_json(rlct_binomial_bound(b)).dump(2) << '\n';
  });

  // sample
  auto* sample = app.add_subcommand("sample", "Draw a dataset from a mixture");
  std::string s_truth;
  int s_M = 2;
  std::size_t s_n = 10;
  std::uint64_t s_seed = 1;
  std::string s_out;
  sample->add_option("--truth", s_truth, R"(mixture JSON, e.g. {"weights":[1],"components":[[0.2,0.3,0.5]]})")
      ->required();
  sample->add_option("--M", s_M, "trials per observation");
  sample->add_option("--n", s_n, "sample size");
  sample->add_option("--seed", s_seed, "seed");
  sample->add_option("--out", s_out, "output path (stdout when absent)");
  sample->callback([&] {
    const auto d = sample_dataset(mixture_from_json(Json::parse(s_truth)), s_M, s_n, s_seed);
    if (s_out.empty())
      std::cout << to_json(d).dump(2) << '\n';
    else
      write_dataset(s_out, d);
  });

  // exact
  auto* exact = app.add_subcommand("exact", "Exact free energy (and G_n when the dataset carries a truth)");
  std::string e_path, e_method = "enum";
  int e_H = 2;
  double e_alpha = 1.0, e_beta = 1.0;
  std::size_t e_grid = 200, e_max_n = 22;
  exact->add_option("--dataset", e_path, "dataset JSON")->required();
  exact->add_option("--H", e_H, "model components");
  exact->add_option("--alpha", e_alpha, "mixing-ratio Dirichlet hyperparameter");
  exact->add_option("--beta", e_beta, "component Dirichlet hyperparameter");
  exact->add_option("--method", e_method)->check(CLI::IsMember({"enum", "quad"}));
  exact->add_option("--grid", e_grid, "quadrature points per dimension");
  exact->add_option("--max-n", e_max_n, "enumeration cap");
  exact->callback([&] {
    const Dataset d = read_dataset(e_path);
    const auto prior = prior_for(d, e_H, e_alpha, e_beta);
    Json out;
    if (e_method == "enum") {
      const EnumerationOptions opt{e_max_n, 1, thread_count_from_env()};
      const auto f = log_marginal_enumeration(d, e_H, prior, opt);
      out["F_n"] = f.value;
      if (d.truth && d.size() + 1 <= e_max_n) {
        try {
          out["G_n"] = gen_error_exact(d, *d.truth, e_H, prior, opt);
        } catch (const DomainError&) {
          // truth without full support: G_n is not defined here
        }
      }
      out["method"] = to_string(f.method);
    } else {
      const auto f = log_marginal_quadrature(d, e_H, prior, e_grid);
      out["F_n"] = f.value;
      out["method"] = to_string(f.method);
    }
    out["n"] = d.size();
    std::cout << out.dump(2) << '\n';
  });

  // estimate
  auto* est = app.add_subcommand("estimate", "Monte Carlo free energy (WBIC or thermodynamic integration)");
  std::string m_path, m_method = "wbic";
  int m_H = 2;
  double m_alpha = 1.0, m_beta = 1.0;
  std::size_t m_sweeps = 20000, m_burn = 2000, m_rungs = 21, m_repeats = 1;
  std::uint64_t m_seed = 1;
  est->add_option("--dataset", m_path, "dataset JSON")->required();
  est->add_option("--H", m_H, "model components");
  est->add_option("--alpha", m_alpha, "mixing-ratio Dirichlet hyperparameter");
  est->add_option("--beta", m_beta, "component Dirichlet hyperparameter");
  est->add_option("--method", m_method)->check(CLI::IsMember({"wbic", "thermo"}));
  est->add_option("--sweeps", m_sweeps, "kept sweeps per chain");
  est->add_option("--burn-in", m_burn, "discarded sweeps per chain");
  est->add_option("--rungs", m_rungs, "thermodynamic ladder size");
  est->add_option("--seed", m_seed, "root seed");
  est->add_option("--repeats", m_repeats, "independent runs with derived seeds");
  est->callback([&] {
    const Dataset d = read_dataset(m_path);
    const auto prior = prior_for(d, m_H, m_alpha, m_beta);
    write_csv_row(std::cout, {"n", "seed", "F_hat", "SE", "method"});
    for (std::size_t i = 0; i < m_repeats; ++i) {
      const std::uint64_t seed = m_repeats == 1 ? m_seed : derive_seed(m_seed, i);
      const GibbsConfig cfg{m_sweeps + m_burn, m_burn, 1, seed, 1.0};
      const auto f = m_method == "wbic" ? wbic_estimate(d, m_H, prior, cfg)
                                        : thermo_integration(d, m_H, prior, power_ladder(m_rungs), cfg);
      if (f.mixing_warning) std::cerr << "warning: split R-hat above " << kRhatThreshold << " (seed " << seed << ")\n";
      write_csv_row(std::cout, {std::to_string(d.size()), std::to_string(seed), fmt_double(f.value),
                                fmt_double(f.standard_error), to_string(f.method)});
    }
  });

  // zeta-volume
  auto* zv = app.add_subcommand("zeta-volume", "Volume-scaling RLCT estimate by multilevel splitting");
  std::string z_problem = "k3", z_truth = "0.2,0.3,0.5", z_fit;
  int z_L = 3, z_M = 2;
  std::size_t z_samples = 20000;
  double z_tmax = 4.0, z_tmin = 1e-16, z_fit_max = 1e-4;
  std::uint64_t z_seed = 1;
  zv->add_option("--problem", z_problem)->check(CLI::IsMember({"toy", "k3", "mixture"}));
  zv->add_option("--L", z_L, "categories (k3)");
  zv->add_option("--M", z_M, "trials (mixture)");
  zv->add_option("--truth", z_truth, "comma-separated truth (mixture)");
  zv->add_option("--samples", z_samples, "samples per level");
  zv->add_option("--t-max", z_tmax, "first threshold");
  zv->add_option("--t-min", z_tmin, "last threshold");
  zv->add_option("--fit-max-t", z_fit_max, "largest threshold used in the fit");
  zv->add_option("--seed", z_seed, "seed");
  zv->add_option("--fit-json", z_fit, "write the fitted lambda, m to this path");
  zv->callback([&] {
    VolumeProblem p;
    if (z_problem == "toy") {
      p = toy_square_problem();
    } else if (z_problem == "k3") {
      p = k3_problem(z_L);
    } else {
      std::vector<double> v;
      std::stringstream ss(z_truth);
      for (std::string tok; std::getline(ss, tok, ',');) v.push_back(std::stod(tok));
      p = mixture_kl_problem(SimplexVector(v), z_M);
    }
    VolumeScalingConfig cfg;
    cfg.thresholds = VolumeScalingConfig::geometric(z_tmax, z_tmin);
    cfg.samples_per_level = z_samples;
    cfg.seed = z_seed;
    cfg.fit_max_t = z_fit_max;
    const auto r = volume_scaling_lambda(p, cfg);
    write_csv_row(std::cout, {"t", "V_hat", "level_acceptance"});
    for (const auto& lv : r.levels)
      write_csv_row(std::cout, {fmt_double(lv.t), fmt_double(std::exp(lv.log_volume)), fmt_double(lv.move_acceptance)});
    const Json fit{{"problem", p.name},      {"lambda_hat", r.lambda_hat},
                   {"m_hat", r.m_hat},       {"stderr", r.stderr},
                   {"lambda_by_m", r.lambda_by_m}, {"fit_levels", r.fit_levels}};
    if (!z_fit.empty())
      write_text_file(z_fit, fit.dump(2) + "\n");
    else
      std::cerr << fit.dump() << '\n';
  });

  // kforms-check
  auto* kf = app.add_subcommand("kforms-check", "Identity and zero-set fuzz checks of the K forms");
  KformsCheckOptions k_opt;
  kf->add_option("--samples", k_opt.samples, "fuzz points");
  kf->add_option("--seed", k_opt.seed, "seed");
  kf->add_option("--max-exponent", k_opt.max_exponent, "largest coordinate exponent");
  kf->callback([&] {
    const auto r = kforms_check(k_opt);
    const Json out{{"pass", r.pass()},
                   {"f_identity", {{"points", r.identity_points}, {"worst_residual", r.identity_worst}, {"pass", r.identity_pass}}},
                   {"zero_sets",
                    {{"points", r.zero_set_points},
                     {"disagreements", r.zero_set_disagreements},
                     {"pass", r.zero_set_pass}}},
                   {"roundtrip", {{"worst", r.roundtrip_worst}, {"pass", r.roundtrip_pass}}}};
    std::cout << out.dump(2) << '\n';
    if (!r.pass()) exit_code = 1;
  });

  // harness run
  auto* harness = app.add_subcommand("harness", "Replicate experiments");
  harness->require_subcommand(1);
  auto* run = harness->add_subcommand("run", "Run an experiment config");
  std::string h_config, h_out;
  run->add_option("--config", h_config, "experiment JSON")->required();
  run->add_option("--out", h_out, "output directory")->required();
  run->callback([&] {
    const auto cfg = experiment_config_from_json(read_json_file(h_config));
    std::filesystem::create_directories(h_out);
    const auto dir = std::filesystem::path(h_out);
    std::vector<std::string> violations;
    if (cfg.alpha_grid.empty()) {
      const auto r = run_lambda_experiment(cfg);
      std::ofstream rows(dir / "rows.csv");
      write_rows_csv(rows, r, cfg);
      write_text_file((dir / "fit.json").string(), fit_json(r).dump(2) + "\n");
      violations = experiment_violations(r, cfg);
    } else {
      const auto s = run_phase_sweep(cfg);
      std::ofstream rows(dir / "rows.csv");
      Json fits = Json::array();
      bool header = true;
      for (const auto& p : s.points) {
        write_rows_csv(rows, p.result, cfg, p.alpha, header);
        header = false;
        Json f = fit_json(p.result);
        f["alpha"] = p.alpha;
        fits.push_back(std::move(f));
        for (auto& v : experiment_violations(p.result, cfg)) violations.push_back(v);
      }
      std::ofstream sweep(dir / "sweep.csv");
      write_sweep_csv(sweep, s);
      const Json fit{{"points", fits},
                     {"kink", {{"alpha_c_hat", s.kink.kink},
                               {"slope_below", s.kink.slope_below},
                               {"slope_above", s.kink.slope_above},
                               {"alpha_c_theory", phase_transition_alpha(cfg.L)}}},
                     {"monotone_within_noise", s.monotone_within_noise()}};
      write_text_file((dir / "fit.json").string(), fit.dump(2) + "\n");
    }
    for (const auto& v : violations) std::cerr << "invariant violated: " << v << '\n';
    if (!violations.empty()) exit_code = 1;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const rlctmix::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return exit_code;
}
