#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace rlctmix {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum(exp(v))) over a span; -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> values) {
  double top = kNegInf;
  for (double v : values) top = std::max(top, v);
  if (top == kNegInf) return kNegInf;
  double s = 0.0;
  for (double v : values) s += std::exp(v - top);
  return top + std::log(s);
}

/// Streaming log-sum-exp: one exp per push, rescales when the max moves.
class LogSumExp {
 public:
  void push(double v) {
    if (v == kNegInf) return;
    if (v <= max_) {
      sum_ += std::exp(v - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - v) + 1.0;
      max_ = v;
    }
  }

  /// Merge another accumulator (used to combine enumeration blocks).
  void merge(const LogSumExp& other) {
    if (other.max_ == kNegInf) return;
    if (max_ == kNegInf) {
      *this = other;
      return;
    }
    if (other.max_ <= max_) {
      sum_ += other.sum_ * std::exp(other.max_ - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - other.max_) + other.sum_;
      max_ = other.max_;
    }
  }

  double value() const { return max_ == kNegInf ? kNegInf : max_ + std::log(sum_); }
  double max() const { return max_; }
  double scaled_sum() const { return sum_; }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
};

/// log Γ(offset + k) for k = 0..count-1, tabulated once.
class LgammaTable {
 public:
  LgammaTable() = default;
  LgammaTable(double offset, std::size_t count, double step = 1.0) : values_(count) {
    for (std::size_t k = 0; k < count; ++k)
      values_[k] = std::lgamma(offset + step * static_cast<double>(k));
  }
  double operator[](std::size_t k) const { return values_[k]; }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<double> values_;
};

inline double log_factorial(int k) { return std::lgamma(static_cast<double>(k) + 1.0); }

/// True when a and b agree to relative tolerance `rel` (absolute near zero).
inline bool nearly_equal(double a, double b, double rel = 1e-9) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= rel * scale;
}

}  // namespace rlctmix
