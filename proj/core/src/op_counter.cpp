#include "ferns/op_counter.hpp"

#include <ostream>

namespace ferns {

std::ostream& operator<<(std::ostream& os, const OpCounter& c) {
  return os << "mults=" << c.mults << " adds=" << c.adds
            << " comparisons=" << c.comparisons << " bias_adds=" << c.bias_adds;
}

}  // namespace ferns
