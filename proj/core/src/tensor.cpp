#include "ferns/tensor.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <sstream>

#include "ferns/error.hpp"

namespace ferns {

std::size_t Shape::size() const {
  constexpr auto kMax = std::numeric_limits<std::size_t>::max();
  std::size_t total = 1;
  for (std::size_t d : {n, c, h, w}) {
    if (d != 0 && total > kMax / d) {
      throw ConfigError("tensor shape " + to_string(*this) +
                        " overflows the addressable range");
    }
    total *= d;
  }
  return total;
}

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << s;
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const Shape& s) {
  return os << '(' << s.n << ',' << s.c << ',' << s.h << ',' << s.w << ')';
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape) : shape_(shape) {
  const std::size_t count = shape.size();
  try {
    data_.assign(count, T(0));
  } catch (const std::bad_alloc&) {
    throw std::runtime_error("cannot allocate tensor of shape " +
                             to_string(shape));
  }
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                      " does not match shape " + to_string(shape_));
  }
}

template <typename T>
void BasicTensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape s) const {
  if (s.size() != data_.size()) {
    throw ConfigError("cannot reshape " + to_string(shape_) + " to " +
                      to_string(s));
  }
  return BasicTensor(s, data_);
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace ferns
