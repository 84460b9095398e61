#pragma once

// Straight-line fits used to read lambda off free-energy curves and volume
// curves.

#include <cmath>
#include <set>
#include <vector>

#include "rlctmix/error.hpp"

namespace rlctmix {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  double rss = 0.0;
  /// slope = sum_k projection[k] * y_k.
  std::vector<double> projection;
};

/// Weighted least squares y = intercept + slope x. Needs at least
/// `min_distinct` distinct x values.
inline LineFit weighted_line_fit(const std::vector<double>& x, const std::vector<double>& y,
                                 const std::vector<double>& w, std::size_t min_distinct = 3) {
  if (x.size() != y.size() || x.size() != w.size()) throw DimensionError("line fit: length mismatch");
  if (std::set<double>(x.begin(), x.end()).size() < min_distinct)
    throw RankError("line fit: need at least " + std::to_string(min_distinct) + " distinct regressor values");
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(w[k] > 0.0)) throw DomainError("line fit: weights must be > 0");
    sw += w[k];
    sx += w[k] * x[k];
    sy += w[k] * y[k];
  }
  const double xm = sx / sw, ym = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += w[k] * (x[k] - xm) * (x[k] - xm);
    sxy += w[k] * (x[k] - xm) * (y[k] - ym);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = ym - f.slope * xm;
  f.projection.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) f.projection[k] = w[k] * (x[k] - xm) / sxx;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double r = y[k] - f.intercept - f.slope * x[k];
    f.rss += w[k] * r * r;
  }
  const double dof = static_cast<double>(x.size()) - 2.0;
  f.stderr_slope = dof > 0 ? std::sqrt(f.rss / dof / sxx) : 0.0;
  return f;
}

struct SlopeRecord {
  double n = 0.0;
  /// mean over replicates of F_n - n S_n
  double y = 0.0;
};

struct SlopeFit {
  double lambda_hat = 0.0;
  double intercept = 0.0;
  double stderr = 0.0;
  int multiplicity = 1;
  std::vector<double> projection;
};

/// Fit y = lambda log n - (m-1) log log n + c with m fixed (m = 1: no
/// log log term).
inline SlopeFit slope_fit(const std::vector<SlopeRecord>& records, const std::vector<double>& weights = {},
                          int multiplicity = 1) {
  if (multiplicity < 1) throw DomainError("slope_fit: multiplicity must be >= 1");
  std::vector<double> x, y, w;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const double n = records[k].n;
    if (!(n > 1.0)) throw DomainError("slope_fit: n must be > 1");
    if (multiplicity > 1 && !(n > std::exp(1.0) - 1e-12))
      throw DomainError("slope_fit: log log n needs n > e when m > 1");
    x.push_back(std::log(n));
    y.push_back(records[k].y + (multiplicity - 1) * std::log(std::log(n)));
    w.push_back(weights.empty() ? 1.0 : weights.at(k));
  }
  if (!weights.empty() && weights.size() != records.size()) throw DimensionError("slope_fit: weights length");
  const auto f = weighted_line_fit(x, y, w);
  return {f.slope, f.intercept, f.stderr_slope, multiplicity, f.projection};
}

}  // namespace rlctmix
