#include "ferns/index_pattern.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ferns/error.hpp"

namespace ferns {

IndexPattern::IndexPattern(std::vector<Offset> offsets)
    : offsets_(std::move(offsets)) {
  if (offsets_.empty() || offsets_.size() > kMaxLength) {
    throw ConfigError("index pattern length " +
                      std::to_string(offsets_.size()) +
                      " outside [1, 16]");
  }
  for (std::size_t m = 0; m < offsets_.size(); ++m) {
    const Offset& o = offsets_[m];
    if (o.dy == 0 && o.dx == 0) {
      throw ConfigError("index pattern compares the central value with itself");
    }
    for (std::size_t q = 0; q < m; ++q) {
      if (offsets_[q] == o) {
        throw ConfigError("index pattern repeats offset (" +
                          std::to_string(o.dy) + "," + std::to_string(o.dx) +
                          ")");
      }
    }
    radius_ = std::max({radius_, std::abs(o.dy), std::abs(o.dx)});
  }
}

PatternSet::PatternSet(std::string name, std::vector<IndexPattern> patterns)
    : name_(std::move(name)), patterns_(std::move(patterns)) {
  if (patterns_.empty()) {
    throw ConfigError("pattern set '" + name_ + "' has no branches");
  }
}

std::size_t PatternSet::weights_per_pair() const {
  return std::accumulate(
      patterns_.begin(), patterns_.end(), std::size_t{0},
      [](std::size_t s, const IndexPattern& p) { return s + p.distribution_size(); });
}

std::size_t PatternSet::comparisons_per_position() const {
  return std::accumulate(
      patterns_.begin(), patterns_.end(), std::size_t{0},
      [](std::size_t s, const IndexPattern& p) { return s + p.length(); });
}

int PatternSet::radius() const {
  int r = 0;
  for (const auto& p : patterns_) r = std::max(r, p.radius());
  return r;
}

PatternSet window_partition(std::string name, int radius, std::size_t group) {
  std::vector<Offset> all;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dy != 0 || dx != 0) all.push_back({dy, dx});
    }
  }
  if (group == 0 || all.size() % group != 0) {
    throw ConfigError("window of radius " + std::to_string(radius) +
                      " cannot be split into groups of " +
                      std::to_string(group));
  }
  std::vector<IndexPattern> patterns;
  for (std::size_t begin = 0; begin < all.size(); begin += group) {
    patterns.emplace_back(std::vector<Offset>(all.begin() + begin,
                                              all.begin() + begin + group));
  }
  return PatternSet(std::move(name), std::move(patterns));
}

PatternSet builtin_pattern(std::string_view name) {
  if (name == "TI1") {
    return PatternSet("TI1", {IndexPattern({{-1, 0}, {0, -1}, {0, 1}, {1, 0}})});
  }
  if (name == "TI2") return window_partition("TI2", 1, 8);
  if (name == "TI3") return window_partition("TI3", 2, 4);
  throw ConfigError("unknown index pattern '" + std::string(name) +
                    "' (valid: TI1, TI2, TI3)");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

int parse_int(std::string_view token, std::size_t line_no) {
  token = trim(token);
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) {
    throw DataError("pattern line " + std::to_string(line_no) +
                    ": bad integer '" + std::string(token) + "'");
  }
  return value;
}

}  // namespace

PatternSet parse_pattern_text(std::string_view text, std::string name) {
  std::vector<IndexPattern> patterns;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{}
                                         : text.substr(eol + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;

    std::vector<Offset> offsets;
    while (!line.empty()) {
      const auto semi = line.find(';');
      std::string_view pair = trim(line.substr(0, semi));
      line = semi == std::string_view::npos ? std::string_view{}
                                            : line.substr(semi + 1);
      if (pair.empty()) {
        if (line.empty()) break;  // trailing ';'
        throw DataError("pattern line " + std::to_string(line_no) +
                        ": empty offset");
      }
      const auto comma = pair.find(',');
      if (comma == std::string_view::npos) {
        throw DataError("pattern line " + std::to_string(line_no) +
                        ": expected 'dy,dx' but got '" + std::string(pair) +
                        "'");
      }
      offsets.push_back({parse_int(pair.substr(0, comma), line_no),
                         parse_int(pair.substr(comma + 1), line_no)});
    }
    try {
      patterns.emplace_back(std::move(offsets));
    } catch (const ConfigError& e) {
      throw DataError("pattern line " + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  if (patterns.empty()) throw DataError("pattern file contains no patterns");
  return PatternSet(std::move(name), std::move(patterns));
}

PatternSet load_pattern_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pattern file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_pattern_text(buf.str(), path.stem().string());
}

std::string format_pattern_text(const PatternSet& set) {
  std::ostringstream os;
  os << "# " << set.name() << '\n';
  for (const auto& p : set.patterns()) {
    for (std::size_t m = 0; m < p.length(); ++m) {
      if (m) os << ';';
      os << p.offsets()[m].dy << ',' << p.offsets()[m].dx;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace ferns
