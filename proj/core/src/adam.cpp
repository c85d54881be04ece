#include "ferns/adam.hpp"

#include <cmath>

#include "ferns/error.hpp"

namespace ferns {

double AdamConfig::decay_for(DecayGroup group) const {
  switch (group) {
    case DecayGroup::kConv: return decay_conv;
    case DecayGroup::kFern: return decay_fern;
    case DecayGroup::kDense: return decay_dense;
    case DecayGroup::kNone: return 0.0;
  }
  return 0.0;
}

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad,
                 AdamMoments<T>& moments, std::uint64_t step,
                 const AdamConfig& config, double learning_rate, double decay,
                 const std::string& what) {
  if (grad.size() != param.size()) {
    throw ConfigError("adam: gradient size mismatch for " + what);
  }
  if (moments.m.size() != param.size()) {
    moments.m.assign(param.size(), T(0));
    moments.v.assign(param.size(), T(0));
  }
  const double t = static_cast<double>(step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t q = 0; q < param.size(); ++q) {
    if (!std::isfinite(static_cast<double>(grad[q]))) {
      throw NumericError("non-finite gradient in " + what + " at element " +
                         std::to_string(q));
    }
    const double g = static_cast<double>(grad[q]) +
                     decay * static_cast<double>(param[q]);
    const double m = config.beta1 * static_cast<double>(moments.m[q]) +
                     (1.0 - config.beta1) * g;
    const double v = config.beta2 * static_cast<double>(moments.v[q]) +
                     (1.0 - config.beta2) * g * g;
    moments.m[q] = static_cast<T>(m);
    moments.v[q] = static_cast<T>(v);
    const double update =
        learning_rate * (m / c1) / (std::sqrt(v / c2) + config.epsilon);
    param[q] = static_cast<T>(static_cast<double>(param[q]) - update);
  }
}

template <typename T>
void Adam<T>::step(const std::vector<ParamBlock<T>>& params) {
  if (moments_.empty()) moments_.resize(params.size());
  if (moments_.size() != params.size()) {
    throw ConfigError("adam: parameter list changed between steps");
  }
  ++step_;
  for (std::size_t b = 0; b < params.size(); ++b) {
    const auto& p = params[b];
    adam_update<T>(p.value, p.grad, moments_[b], step_, config_,
                   config_.learning_rate, config_.decay_for(p.decay), p.name);
  }
}

template void adam_update(std::span<float>, std::span<const float>,
                          AdamMoments<float>&, std::uint64_t,
                          const AdamConfig&, double, double,
                          const std::string&);
template void adam_update(std::span<double>, std::span<const double>,
                          AdamMoments<double>&, std::uint64_t,
                          const AdamConfig&, double, double,
                          const std::string&);
template class Adam<float>;
template class Adam<double>;

}  // namespace ferns
