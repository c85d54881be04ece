#pragma once

#include <cstdint>
#include <iosfwd>

namespace ferns {

/// Arithmetic tallies recorded by the fern and convolution kernels.
///
/// `bias_adds` is kept apart from `adds` so that the remaining fields can be
/// compared directly against the closed-form complexity expressions.
struct OpCounter {
  std::uint64_t mults = 0;
  std::uint64_t adds = 0;
  std::uint64_t comparisons = 0;
  std::uint64_t bias_adds = 0;

  void reset() { *this = OpCounter{}; }

  OpCounter& operator+=(const OpCounter& o) {
    mults += o.mults;
    adds += o.adds;
    comparisons += o.comparisons;
    bias_adds += o.bias_adds;
    return *this;
  }

  friend bool operator==(const OpCounter&, const OpCounter&) = default;
};

std::ostream& operator<<(std::ostream& os, const OpCounter& c);

}  // namespace ferns
