#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ferns {

struct Offset {
  int dy = 0;
  int dx = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

/// Ordered set of window offsets compared against the central value.
///
/// Offset m contributes bit m of the distribution index, so the first listed
/// offset is the least significant bit.
class IndexPattern {
 public:
  static constexpr std::size_t kMaxLength = 16;

  /// Throws ConfigError for empty, oversized, (0,0)-containing or
  /// duplicated offset lists.
  explicit IndexPattern(std::vector<Offset> offsets);

  const std::vector<Offset>& offsets() const { return offsets_; }
  std::size_t length() const { return offsets_.size(); }
  std::size_t distribution_size() const { return std::size_t{1} << length(); }
  int radius() const { return radius_; }

  friend bool operator==(const IndexPattern&, const IndexPattern&) = default;

 private:
  std::vector<Offset> offsets_;
  int radius_ = 0;
};

/// The inception branches of one fern layer.
class PatternSet {
 public:
  PatternSet(std::string name, std::vector<IndexPattern> patterns);

  const std::string& name() const { return name_; }
  const std::vector<IndexPattern>& patterns() const { return patterns_; }
  std::size_t width() const { return patterns_.size(); }
  const IndexPattern& operator[](std::size_t k) const { return patterns_[k]; }

  /// Sum over branches of 2^|BD_k|: weights per (output, input) pair.
  std::size_t weights_per_pair() const;
  /// Sum over branches of |BD_k|: comparisons per input position.
  std::size_t comparisons_per_position() const;
  int radius() const;

  friend bool operator==(const PatternSet&, const PatternSet&) = default;

 private:
  std::string name_;
  std::vector<IndexPattern> patterns_;
};

/// "TI1", "TI2" or "TI3"; anything else is a ConfigError naming the options.
PatternSet builtin_pattern(std::string_view name);

/// All non-central offsets of a (2r+1)x(2r+1) window in row-major order,
/// split into consecutive groups of `group` offsets.
PatternSet window_partition(std::string name, int radius, std::size_t group);

/// Pattern file grammar (one branch per line, line order is branch order):
///
///   file    := { line "\n" }
///   line    := blank | comment | pattern
///   comment := "#" { any }
///   pattern := pair { ";" pair } [ ";" ]
///   pair    := int "," int            (dy first, then dx)
///
/// Whitespace around tokens is ignored. Offset order within a line is the
/// bit order.
PatternSet parse_pattern_text(std::string_view text, std::string name);
PatternSet load_pattern_file(const std::filesystem::path& path);
std::string format_pattern_text(const PatternSet& set);

}  // namespace ferns
