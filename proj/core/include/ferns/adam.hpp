#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ferns/layer.hpp"

namespace ferns {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay_conv = 5e-4;
  double decay_fern = 1e-8;
  double decay_dense = 5e-4;

  double decay_for(DecayGroup group) const;
};

template <typename T>
struct AdamMoments {
  std::vector<T> m;
  std::vector<T> v;
};

/// One Adam update of `param` with coupled weight decay:
///   g' = g + decay * p
///   m  = b1 m + (1 - b1) g'      v = b2 v + (1 - b2) g'^2
///   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// `step` is the 1-based update count. Throws NumericError naming `what` when
/// a gradient is not finite.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad,
                 AdamMoments<T>& moments, std::uint64_t step,
                 const AdamConfig& config, double learning_rate, double decay,
                 const std::string& what);

/// Optimizer state for a fixed list of parameter blocks.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  std::uint64_t steps() const { return step_; }

  /// Applies one update to every block, using each block's gradient.
  void step(const std::vector<ParamBlock<T>>& params);

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<AdamMoments<T>> moments_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace ferns
