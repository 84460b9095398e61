#pragma once

#include <cstdint>
#include <vector>

#include "rlctmix/error.hpp"

namespace rlctmix {

/// base^digits, or SizeError if it does not fit in 64 bits.
inline std::uint64_t checked_power(std::uint64_t base, std::size_t digits) {
  std::uint64_t out = 1;
  for (std::size_t i = 0; i < digits; ++i) {
    if (base != 0 && out > UINT64_MAX / base) throw SizeError("assignment count overflows 64 bits");
    out *= base;
  }
  return out;
}

/// Reflected base-`radix` Gray code over `digits` positions. Consecutive codes
/// differ in exactly one position, by +-1. Can start at any rank, which is
/// how enumeration is split into contiguous blocks.
class ReflectedGrayCounter {
 public:
  struct Step {
    std::size_t position;
    int from;
    int to;
  };

  ReflectedGrayCounter(std::size_t digits, int radix, std::uint64_t start_rank = 0)
      : radix_(radix), base_digits_(digits, 0), code_(digits, 0), reversed_(digits, false),
        rank_(start_rank), total_(checked_power(static_cast<std::uint64_t>(radix), digits)) {
    if (radix < 1) throw DomainError("Gray code radix must be >= 1");
    if (start_rank > total_) throw SizeError("Gray code start rank out of range");
    std::uint64_t r = start_rank == total_ ? 0 : start_rank;
    for (std::size_t i = 0; i < digits; ++i) {
      base_digits_[i] = static_cast<int>(r % static_cast<std::uint64_t>(radix));
      r /= static_cast<std::uint64_t>(radix);
    }
    // Top digit is traversed forwards; a digit runs backwards when an odd
    // number of the digits above it hold odd code values.
    bool rev = false;
    for (std::size_t i = digits; i-- > 0;) {
      reversed_[i] = rev;
      code_[i] = rev ? radix - 1 - base_digits_[i] : base_digits_[i];
      if (code_[i] % 2 == 1) rev = !rev;
    }
  }

  std::uint64_t rank() const noexcept { return rank_; }
  std::uint64_t total() const noexcept { return total_; }
  const std::vector<int>& code() const noexcept { return code_; }

  /// Advance to rank+1. Returns false (and leaves the code unchanged) when
  /// the current code is the last one.
  bool next(Step& step) {
    if (rank_ + 1 >= total_) {
      rank_ = total_;
      return false;
    }
    std::size_t i = 0;
    while (base_digits_[i] == radix_ - 1) {
      base_digits_[i] = 0;
      ++i;
    }
    ++base_digits_[i];
    step.position = i;
    step.from = code_[i];
    code_[i] += reversed_[i] ? -1 : 1;
    step.to = code_[i];
    // The changed digit flipped parity, so every lower digit reverses.
    for (std::size_t j = 0; j < i; ++j) reversed_[j] = !reversed_[j];
    ++rank_;
    return true;
  }

 private:
  int radix_;
  std::vector<int> base_digits_;
  std::vector<int> code_;
  std::vector<bool> reversed_;
  std::uint64_t rank_;
  std::uint64_t total_;
};

}  // namespace rlctmix
