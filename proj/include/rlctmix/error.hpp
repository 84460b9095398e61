#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rlctmix {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arguments whose shapes (L, M, H, lengths) disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented precondition (simplex tolerance, positivity, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A count or index would overflow, or a configured cap is exceeded.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// q(x) > 0 but p(x) = 0 for some support point; carries that point.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<int> counts)
      : Error(what), counts_(std::move(counts)) {}

  const std::vector<int>& counts() const noexcept { return counts_; }

 private:
  std::vector<int> counts_;
};

/// Multilevel splitting ran out of survivors at a level.
class StarvationError : public Error {
 public:
  StarvationError(const std::string& what, std::size_t level)
      : Error(what), level_(level) {}

  std::size_t level() const noexcept { return level_; }

 private:
  std::size_t level_;
};

/// Least squares with too few distinct regressor values.
class RankError : public Error {
 public:
  using Error::Error;
};

}  // namespace rlctmix
