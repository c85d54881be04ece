#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ferns {

/// Extents of a rank-4 tensor in (batch, depth, height, width) order.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  /// Number of elements, throws ConfigError on overflow.
  std::size_t size() const;
  std::size_t plane() const { return h * w; }
  std::size_t sample() const { return c * h * w; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);
std::ostream& operator<<(std::ostream& os, const Shape& s);

/// Dense row-major (N, C, H, W) tensor owning its storage.
///
/// Element access through at() is bounds-checked in debug builds;
/// padded() never touches storage for spatial coordinates outside the
/// plane and returns exactly zero there.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape);
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor zeros(Shape shape) { return BasicTensor(shape); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t y,
                     std::size_t x) const {
    assert(n < shape_.n && c < shape_.c && y < shape_.h && x < shape_.w);
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data_[offset(n, c, y, x)];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t y,
              std::size_t x) const {
    return data_[offset(n, c, y, x)];
  }

  /// Zero-padded read: any (y, x) outside the plane yields 0.
  T padded(std::size_t n, std::size_t c, std::ptrdiff_t y,
           std::ptrdiff_t x) const {
    assert(n < shape_.n && c < shape_.c);
    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(shape_.h) ||
        x >= static_cast<std::ptrdiff_t>(shape_.w)) {
      return T(0);
    }
    return data_[offset(n, c, static_cast<std::size_t>(y),
                        static_cast<std::size_t>(x))];
  }

  /// Contiguous H*W slice for one (n, c).
  std::span<T> plane(std::size_t n, std::size_t c) {
    return std::span<T>(data_).subspan((n * shape_.c + c) * shape_.plane(),
                                       shape_.plane());
  }
  std::span<const T> plane(std::size_t n, std::size_t c) const {
    return std::span<const T>(data_).subspan(
        (n * shape_.c + c) * shape_.plane(), shape_.plane());
  }

  /// Contiguous C*H*W slice for one batch item.
  std::span<T> sample(std::size_t n) {
    return std::span<T>(data_).subspan(n * shape_.sample(), shape_.sample());
  }
  std::span<const T> sample(std::size_t n) const {
    return std::span<const T>(data_).subspan(n * shape_.sample(),
                                             shape_.sample());
  }

  void fill(T v);

  /// Same data under a new shape of equal element count.
  BasicTensor reshaped(Shape s) const;

  template <typename U>
  BasicTensor<U> cast() const {
    BasicTensor<U> out(shape_);
    auto dst = out.data();
    for (std::size_t k = 0; k < data_.size(); ++k) {
      dst[k] = static_cast<U>(data_[k]);
    }
    return out;
  }

 private:
  Shape shape_{};
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace ferns
