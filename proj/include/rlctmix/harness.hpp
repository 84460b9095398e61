#pragma once

// Replicate sweeps over n (and optionally the mixing hyperparameter alpha),
// slope fits against the theoretical lambda, and the per-dataset F/G check.
//
// Each replicate r draws one dataset of size max(n_grid) from
// derive_seed(root_seed, r) and uses its prefixes for every n, so the
// F_n - n S_n curve of a replicate is a single path. Monte Carlo chains for
// (r, n index k) are seeded with derive_seed(replicate seed, k + 1) and do
// not depend on alpha, which gives the alpha sweep common random numbers.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rlctmix/exact_bayes.hpp"
#include "rlctmix/free_energy_mc.hpp"
#include "rlctmix/io.hpp"
#include "rlctmix/regression.hpp"
#include "rlctmix/rlct.hpp"

namespace rlctmix {

struct MonteCarloSettings {
  std::size_t sweeps = 20000;
  std::size_t burn_in = 2000;
  std::size_t rungs = 21;
};

struct ExperimentConfig {
  int L = 3;
  int M = 2;
  int H_model = 2;
  MixtureParams truth = MixtureParams::single(SimplexVector({0.2, 0.3, 0.5}));
  std::vector<int> n_grid;
  std::size_t replicates = 1;
  /// Symmetric Dirichlet hyperparameters; `bounded` means alpha = beta = 1
  /// with the bounded-prior theory attached.
  double prior_alpha = 1.0;
  double prior_beta = 1.0;
  bool bounded = false;
  FreeEnergyMethod method = FreeEnergyMethod::enumeration;
  std::uint64_t root_seed = 1;
  std::vector<double> alpha_grid;
  /// log log n hypothesis for the fit; the theoretical m when absent.
  std::optional<int> multiplicity;
  /// n below this are computed but left out of the fit.
  int n_min = 6;
  bool gen_error = false;
  MonteCarloSettings mc;
  std::size_t max_enumeration_n = 22;

  ConjugatePrior prior() const { return ConjugatePrior::symmetric(H_model, L, prior_alpha, prior_beta); }

  void validate() const {
    if (L < 2 || M < 1) throw DimensionError("config: need L >= 2 and M >= 1");
    if (H_model < 1) throw DimensionError("config: H_model must be >= 1");
    if (static_cast<int>(truth.categories()) != L) throw DimensionError("config: truth has the wrong L");
    if (n_grid.empty()) throw DomainError("config: n_grid is empty");
    if (replicates < 1) throw DomainError("config: replicates must be >= 1");
    for (std::size_t k = 0; k < n_grid.size(); ++k) {
      if (n_grid[k] < 1) throw DomainError("config: n values must be >= 1");
      if (k > 0 && n_grid[k] <= n_grid[k - 1]) throw DomainError("config: n_grid must be increasing");
    }
    const int n_max = n_grid.back();
    if (method == FreeEnergyMethod::enumeration) {
      const std::size_t need = static_cast<std::size_t>(n_max) + (gen_error ? 1 : 0);
      if (need > max_enumeration_n)
        throw SizeError("config: n = " + std::to_string(need) + " exceeds the enumeration cap " +
                        std::to_string(max_enumeration_n));
    } else if (method == FreeEnergyMethod::quadrature) {
      throw DomainError("config: quadrature is an oracle, not an experiment method");
    } else if (method == FreeEnergyMethod::wbic && n_grid.front() < 3) {
      throw DomainError("config: WBIC needs n >= 3");
    }
    if (gen_error && method != FreeEnergyMethod::enumeration)
      throw DomainError("config: gen_error needs the enumeration method");
    if (multiplicity && *multiplicity < 1) throw DomainError("config: multiplicity must be >= 1");
    if (!(prior_alpha > 0.0) || !(prior_beta > 0.0)) throw DomainError("config: prior must be positive");
    for (double a : alpha_grid)
      if (!(a > 0.0)) throw DomainError("config: alpha_grid entries must be > 0");
  }
};

inline FreeEnergyMethod method_from_string(const std::string& s) {
  if (s == "enumeration" || s == "enum") return FreeEnergyMethod::enumeration;
  if (s == "quadrature" || s == "quad") return FreeEnergyMethod::quadrature;
  if (s == "wbic") return FreeEnergyMethod::wbic;
  if (s == "thermo") return FreeEnergyMethod::thermo;
  throw DomainError("unknown method '" + s + "'");
}

/// Reads the JSON experiment description; see configs/ for examples.
inline ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig c;
  c.L = j.at("L").get<int>();
  c.M = j.at("M").get<int>();
  c.H_model = j.value("H_model", 2);
  if (j.contains("truth")) c.truth = mixture_from_json(j.at("truth"));
  c.n_grid = j.at("n_grid").get<std::vector<int>>();
  c.replicates = j.value("replicates", std::size_t{1});
  if (j.contains("prior")) {
    const auto& p = j.at("prior");
    if (p.is_string()) {
      if (p.get<std::string>() != "bounded") throw DomainError("config: prior must be an object or \"bounded\"");
      c.bounded = true;
    } else {
      c.prior_alpha = p.value("alpha", 1.0);
      c.prior_beta = p.value("beta", 1.0);
    }
  }
  c.method = method_from_string(j.value("method", std::string("enumeration")));
  c.root_seed = j.value("root_seed", std::uint64_t{1});
  if (j.contains("alpha_grid")) c.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
  if (j.contains("multiplicity") && !j.at("multiplicity").is_null()) c.multiplicity = j.at("multiplicity").get<int>();
  c.n_min = j.value("n_min", 6);
  c.gen_error = j.value("gen_error", false);
  if (j.contains("mc")) {
    const auto& m = j.at("mc");
    c.mc.sweeps = m.value("sweeps", c.mc.sweeps);
    c.mc.burn_in = m.value("burn_in", c.mc.burn_in);
    c.mc.rungs = m.value("rungs", c.mc.rungs);
  }
  c.max_enumeration_n = j.value("max_enumeration_n", c.max_enumeration_n);
  c.validate();
  return c;
}

/// Worker count from RLCTMIX_THREADS, default 1.
inline unsigned thread_count_from_env() {
  const char* v = std::getenv("RLCTMIX_THREADS");
  if (!v || !*v) return 1;
  const long t = std::strtol(v, nullptr, 10);
  return t >= 1 ? static_cast<unsigned>(t) : 1u;
}

struct ExperimentRow {
  int n = 0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  double F = 0.0;
  double S_n = 0.0;
  std::optional<double> G;
  double SE = 0.0;

  double excess() const { return F - n * S_n; }
};

struct NAggregate {
  int n = 0;
  double mean_excess = 0.0;
  double stderr = 0.0;
  bool in_fit = false;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;  // replicate-major: rows[r * |n_grid| + k]
  std::vector<NAggregate> aggregates;
  std::optional<SlopeFit> fit;
  /// Replicate-level standard error of lambda_hat (NaN with one replicate).
  double lambda_stderr = std::numeric_limits<double>::quiet_NaN();
  std::optional<RlctReport> theory;
};

/// Theory attached to a configuration: the main theorem for H = 2 against a
/// single multinomial, the regular value for H = 1.
inline std::optional<RlctReport> theoretical_rlct(const ExperimentConfig& c) {
  if (c.H_model == 1) return rlct_regular(c.L - 1);
  if (c.H_model == 2 && c.truth.components_count() == 1) {
    return rlct_two_component(c.L, c.bounded ? PriorSpec::bounded() : PriorSpec::dirichlet(c.prior_alpha));
  }
  return std::nullopt;
}

namespace detail {

template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline ExperimentRow run_cell(const ExperimentConfig& c, const ConjugatePrior& prior, const Dataset& full,
                              std::size_t r, std::size_t k) {
  const int n = c.n_grid[k];
  const Dataset d = full.prefix(static_cast<std::size_t>(n));
  ExperimentRow row;
  row.n = n;
  row.replicate = r;
  row.seed = full.seed;
  row.S_n = empirical_entropy(c.truth, d);
  const EnumerationOptions enum_opt{c.max_enumeration_n, 1, 1};
  const GibbsConfig gc{c.mc.sweeps + c.mc.burn_in, c.mc.burn_in, 1, derive_seed(full.seed, k + 1), 1.0};
  FreeEnergyValue f;
  switch (c.method) {
    case FreeEnergyMethod::enumeration:
      f = log_marginal_enumeration(d, c.H_model, prior, enum_opt);
      break;
    case FreeEnergyMethod::wbic:
      f = wbic_estimate(d, c.H_model, prior, gc);
      break;
    case FreeEnergyMethod::thermo:
      f = thermo_integration(d, c.H_model, prior, power_ladder(c.mc.rungs), gc);
      break;
    default:
      throw DomainError("run_lambda_experiment: unsupported method");
  }
  row.F = f.value;
  row.SE = f.standard_error;
  if (c.gen_error) row.G = gen_error_exact(d, c.truth, c.H_model, prior, enum_opt);
  return row;
}

}  // namespace detail

inline ExperimentResult run_lambda_experiment(const ExperimentConfig& c, unsigned threads = thread_count_from_env()) {
  c.validate();
  const ConjugatePrior prior = c.bounded ? ConjugatePrior::symmetric(c.H_model, c.L, 1.0, 1.0) : c.prior();
  const std::size_t K = c.n_grid.size();
  const std::size_t R = c.replicates;

  ExperimentResult out;
  out.rows.resize(R * K);
  detail::parallel_for(R, threads, [&](std::size_t r) {
    const Dataset full =
        sample_dataset(c.truth, c.M, static_cast<std::size_t>(c.n_grid.back()), derive_seed(c.root_seed, r));
    for (std::size_t k = 0; k < K; ++k) out.rows[r * K + k] = detail::run_cell(c, prior, full, r, k);
  });

  std::vector<SlopeRecord> records;
  std::vector<std::size_t> fit_index;
  for (std::size_t k = 0; k < K; ++k) {
    NAggregate a;
    a.n = c.n_grid[k];
    double s = 0.0, ss = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      const double e = out.rows[r * K + k].excess();
      s += e;
      ss += e * e;
    }
    a.mean_excess = s / static_cast<double>(R);
    a.stderr = R > 1 ? std::sqrt(std::max(0.0, (ss - s * a.mean_excess) / static_cast<double>(R - 1)) / R)
                     : std::numeric_limits<double>::quiet_NaN();
    a.in_fit = a.n >= c.n_min;
    if (a.in_fit) {
      records.push_back({static_cast<double>(a.n), a.mean_excess});
      fit_index.push_back(k);
    }
    out.aggregates.push_back(a);
  }

  out.theory = theoretical_rlct(c);
  const int m = c.multiplicity.value_or(out.theory ? out.theory->multiplicity : 1);
  if (records.size() >= 3) {
    out.fit = slope_fit(records, {}, m);
    // lambda_hat is linear in the per-n means, so the same projection applied
    // to each replicate's path gives replicate-level slopes.
    if (R > 1) {
      double s = 0.0, ss = 0.0;
      for (std::size_t r = 0; r < R; ++r) {
        double l = 0.0;
        for (std::size_t j = 0; j < fit_index.size(); ++j)
          l += out.fit->projection[j] * out.rows[r * K + fit_index[j]].excess();
        s += l;
        ss += l * l;
      }
      const double mean = s / static_cast<double>(R);
      out.lambda_stderr = std::sqrt(std::max(0.0, (ss - s * mean) / static_cast<double>(R - 1)) / R);
    }
  }
  return out;
}

struct HingeFit {
  double kink = 0.0;
  double level = 0.0;
  double slope_below = 0.0;
  double slope_above = 0.0;
  double rss = 0.0;
};

/// Two-segment continuous fit y = p + s1 min(x - c, 0) + s2 max(x - c, 0),
/// with c scanned over a grid strictly inside (x_min, x_max) plus the
/// interior x values; the smallest minimizer of the residual sum of squares
/// wins.
inline HingeFit hinge_fit(const std::vector<double>& x, const std::vector<double>& y, std::size_t grid = 400) {
  if (x.size() != y.size()) throw DimensionError("hinge_fit: x and y lengths differ");
  if (x.size() < 3) throw RankError("hinge_fit: need at least 3 points");
  const double lo = *std::min_element(x.begin(), x.end());
  const double hi = *std::max_element(x.begin(), x.end());
  if (!(hi > lo)) throw RankError("hinge_fit: x values are all equal");
  std::vector<double> candidates;
  for (std::size_t g = 1; g < grid; ++g)
    candidates.push_back(lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid));
  for (double v : x)
    if (v > lo && v < hi) candidates.push_back(v);
  std::sort(candidates.begin(), candidates.end());
  HingeFit best;
  best.rss = std::numeric_limits<double>::infinity();
  for (double c : candidates) {
    // Normal equations for (p, s1, s2).
    double A[3][4] = {};
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double f[3] = {1.0, std::min(x[i] - c, 0.0), std::max(x[i] - c, 0.0)};
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) A[a][b] += f[a] * f[b];
        A[a][3] += f[a] * y[i];
      }
    }
    bool singular = false;
    for (int col = 0; col < 3 && !singular; ++col) {
      int piv = col;
      for (int r = col + 1; r < 3; ++r)
        if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
      if (std::abs(A[piv][col]) < 1e-14) {
        singular = true;
        break;
      }
      std::swap(A[col], A[piv]);
      for (int r = 0; r < 3; ++r) {
        if (r == col) continue;
        const double f = A[r][col] / A[col][col];
        for (int k = col; k < 4; ++k) A[r][k] -= f * A[col][k];
      }
    }
    if (singular) continue;
    const double p = A[0][3] / A[0][0], s1 = A[1][3] / A[1][1], s2 = A[2][3] / A[2][2];
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = y[i] - (p + s1 * std::min(x[i] - c, 0.0) + s2 * std::max(x[i] - c, 0.0));
      rss += e * e;
    }
    if (rss < best.rss - 1e-15) best = {c, p, s1, s2, rss};
  }
  if (!std::isfinite(best.rss)) throw RankError("hinge_fit: no identifiable split");
  return best;
}

struct SweepPoint {
  double alpha = 0.0;
  double lambda_hat = 0.0;
  double stderr = 0.0;
  double lambda_theory = 0.0;
  ExperimentResult result;
};

struct PhaseSweepResult {
  std::vector<SweepPoint> points;
  HingeFit kink;
  /// Largest drop lambda_hat[k] - lambda_hat[k+1] in excess of the larger
  /// of the two stderrs; <= 0 when the sequence is nondecreasing within noise.
  double worst_monotonicity_violation = 0.0;
  bool monotone_within_noise() const { return worst_monotonicity_violation <= 0.0; }
};

/// lambda_theory = (L-1)/2 + min(alpha/2, (L-1)/4) against alpha.
inline PhaseSweepResult run_phase_sweep(const ExperimentConfig& base, unsigned threads = thread_count_from_env()) {
  if (base.alpha_grid.empty()) throw DomainError("run_phase_sweep: alpha_grid is empty");
  PhaseSweepResult out;
  std::vector<double> xs, ys;
  for (double a : base.alpha_grid) {
    ExperimentConfig c = base;
    c.bounded = false;
    c.prior_alpha = a;
    SweepPoint p;
    p.alpha = a;
    p.result = run_lambda_experiment(c, threads);
    if (!p.result.fit) throw RankError("run_phase_sweep: fewer than 3 n values in the fit");
    p.lambda_hat = p.result.fit->lambda_hat;
    p.stderr = p.result.lambda_stderr;
    p.lambda_theory = (c.L - 1) / 2.0 + std::min(a / 2.0, (c.L - 1) / 4.0);
    xs.push_back(a);
    ys.push_back(p.lambda_hat);
    out.points.push_back(std::move(p));
  }
  out.worst_monotonicity_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < out.points.size(); ++k) {
    const auto& a = out.points[k];
    const auto& b = out.points[k + 1];
    const double noise = std::isfinite(a.stderr) && std::isfinite(b.stderr) ? std::max(a.stderr, b.stderr) : 0.0;
    out.worst_monotonicity_violation =
        std::max(out.worst_monotonicity_violation, a.lambda_hat - b.lambda_hat - noise);
  }
  if (out.points.size() < 2) out.worst_monotonicity_violation = 0.0;
  if (xs.size() >= 3) out.kink = hinge_fit(xs, ys);
  return out;
}

struct GnIdentityReport {
  std::size_t datasets = 0;
  double worst_deviation = 0.0;
  double tolerance = 1e-9;
  /// G_0 = KL(q || prior predictive), reported for the empty dataset.
  double g0 = 0.0;
  bool pass() const { return worst_deviation <= tolerance; }
};

/// For each replicate and n in the grid: |G_n (direct KL) - (sum_x q(x)
/// F_{n+1} - F_n - S)|.
inline GnIdentityReport run_gn_identity_check(const ExperimentConfig& c, unsigned threads = thread_count_from_env()) {
  c.validate();
  if (c.method != FreeEnergyMethod::enumeration) throw DomainError("gn identity check needs enumeration");
  if (static_cast<std::size_t>(c.n_grid.back()) + 1 > c.max_enumeration_n)
    throw SizeError("gn identity check: n + 1 exceeds the enumeration cap");
  const ConjugatePrior prior = c.bounded ? ConjugatePrior::symmetric(c.H_model, c.L, 1.0, 1.0) : c.prior();
  const EnumerationOptions opt{c.max_enumeration_n, 1, 1};
  const std::size_t K = c.n_grid.size();
  std::vector<double> dev(c.replicates * K, 0.0);
  detail::parallel_for(c.replicates, threads, [&](std::size_t r) {
    const Dataset full =
        sample_dataset(c.truth, c.M, static_cast<std::size_t>(c.n_grid.back()), derive_seed(c.root_seed, r));
    for (std::size_t k = 0; k < K; ++k) {
      const Dataset d = full.prefix(static_cast<std::size_t>(c.n_grid[k]));
      const double direct = gen_error_exact(d, c.truth, c.H_model, prior, opt);
      const double via = gen_error_via_free_energy(d, c.truth, c.H_model, prior, opt);
      dev[r * K + k] = std::abs(direct - via);
    }
  });
  GnIdentityReport rep;
  rep.datasets = dev.size();
  for (double v : dev) rep.worst_deviation = std::max(rep.worst_deviation, v);
  Dataset empty;
  empty.L = c.L;
  empty.M = c.M;
  rep.g0 = gen_error_exact(empty, c.truth, c.H_model, prior, opt);
  return rep;
}

// ---------------------------------------------------------------------------
// Output

inline std::string fmt_double(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// rows.csv; `alpha` adds a leading column for sweeps.
inline void write_rows_csv(std::ostream& os, const ExperimentResult& r, const ExperimentConfig& c,
                           std::optional<double> alpha = std::nullopt, bool header = true) {
  if (header) os << (alpha ? "alpha," : "") << "n,replicate,seed,F,S_n" << (c.gen_error ? ",G" : "") << ",SE\n";
  for (const auto& row : r.rows) {
    if (alpha) os << fmt_double(*alpha) << ',';
    os << row.n << ',' << row.replicate << ',' << row.seed << ',' << fmt_double(row.F) << ','
       << fmt_double(row.S_n);
    if (c.gen_error) os << ',' << (row.G ? fmt_double(*row.G) : "");
    os << ',' << fmt_double(row.SE) << '\n';
  }
}

inline Json nan_to_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json fit_json(const ExperimentResult& r) {
  Json j;
  j["lambda_hat"] = r.fit ? Json(r.fit->lambda_hat) : Json(nullptr);
  j["stderr"] = nan_to_null(r.lambda_stderr);
  j["intercept"] = r.fit ? Json(r.fit->intercept) : Json(nullptr);
  j["m_hypothesis"] = r.fit ? Json(r.fit->multiplicity) : Json(nullptr);
  j["lambda_theory"] = r.theory ? Json(r.theory->lambda) : Json(nullptr);
  j["m_theory"] = r.theory ? Json(r.theory->multiplicity) : Json(nullptr);
  Json agg = Json::array();
  for (const auto& a : r.aggregates)
    agg.push_back({{"n", a.n}, {"mean_F_minus_nS_n", a.mean_excess}, {"stderr", nan_to_null(a.stderr)},
                   {"in_fit", a.in_fit}});
  j["aggregates"] = agg;
  return j;
}

inline void write_sweep_csv(std::ostream& os, const PhaseSweepResult& s) {
  os << "alpha,lambda_hat,stderr,lambda_theory\n";
  for (const auto& p : s.points)
    os << fmt_double(p.alpha) << ',' << fmt_double(p.lambda_hat) << ',' << fmt_double(p.stderr) << ','
       << fmt_double(p.lambda_theory) << '\n';
}

/// Hard invariants of a finished lambda experiment; empty when all hold.
inline std::vector<std::string> experiment_violations(const ExperimentResult& r, const ExperimentConfig& c) {
  std::vector<std::string> out;
  if (r.rows.size() != c.n_grid.size() * c.replicates) out.push_back("row count != |n_grid| x replicates");
  for (const auto& row : r.rows)
    if (!std::isfinite(row.F)) {
      out.push_back("non-finite free energy at n = " + std::to_string(row.n));
      break;
    }
  if (r.fit && !std::isfinite(r.fit->lambda_hat)) out.push_back("non-finite lambda_hat");
  // Singular two-component fit against one true component stays below the
  // regular-dimension penalty (2L-1)/2.
  if (r.fit && c.H_model == 2 && c.truth.components_count() == 1 && !(r.fit->lambda_hat < (2 * c.L - 1) / 2.0))
    out.push_back("singular lambda_hat is not below the regular value (2L-1)/2");
  return out;
}

}  // namespace rlctmix
