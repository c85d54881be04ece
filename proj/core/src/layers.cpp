#include "ferns/layers.hpp"

#include <algorithm>
#include <cmath>

#include "ferns/error.hpp"
#include "ferns/parallel.hpp"

namespace ferns {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kFern: return "fern";
    case LayerKind::kConv: return "conv";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kDense: return "dense";
    case LayerKind::kFlatten: return "flatten";
  }
  return "unknown";
}

// ReLU

template <typename T>
BasicTensor<T> ReluLayer<T>::propagate(const BasicTensor<T>& input,
                                       bool keep_state) {
  BasicTensor<T> out(input.shape());
  auto src = input.data();
  auto dst = out.data();
  for (std::size_t q = 0; q < src.size(); ++q) {
    dst[q] = src[q] > T(0) ? src[q] : T(0);
  }
  if (keep_state) {
    active_.resize(src.size());
    for (std::size_t q = 0; q < src.size(); ++q) active_[q] = src[q] > T(0);
    kept_shape_ = input.shape();
  }
  return out;
}

template <typename T>
BasicTensor<T> ReluLayer<T>::backpropagate(const BasicTensor<T>& grad_output,
                                           bool want_input_grad) {
  if (grad_output.shape() != kept_shape_) {
    throw ConfigError("relu gradient shape mismatch");
  }
  if (!want_input_grad) return {};
  BasicTensor<T> out(kept_shape_);
  auto g = grad_output.data();
  auto dst = out.data();
  for (std::size_t q = 0; q < g.size(); ++q) dst[q] = active_[q] ? g[q] : T(0);
  return out;
}

// Max pooling

template <typename T>
Shape MaxPoolLayer<T>::output_shape(const Shape& input) const {
  if (input.h < 2 || input.w < 2) {
    throw ConfigError("maxpool needs at least 2x2 input, got " +
                      to_string(input));
  }
  return {input.n, input.c, input.h / 2, input.w / 2};
}

template <typename T>
BasicTensor<T> MaxPoolLayer<T>::propagate(const BasicTensor<T>& input,
                                          bool keep_state) {
  const Shape& s = input.shape();
  const Shape os = output_shape(s);
  BasicTensor<T> out(os);
  if (keep_state) {
    argmax_.assign(out.size(), 0);
    kept_shape_ = s;
  }
  auto src = input.data();
  auto dst = out.data();
  std::size_t q = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < os.h; ++y) {
        for (std::size_t x = 0; x < os.w; ++x, ++q) {
          std::size_t best = input.offset(n, c, 2 * y, 2 * x);
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t at = input.offset(n, c, 2 * y + dy, 2 * x + dx);
              if (src[at] > src[best]) best = at;
            }
          }
          dst[q] = src[best];
          if (keep_state) argmax_[q] = best;
        }
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> MaxPoolLayer<T>::backpropagate(const BasicTensor<T>& grad_output,
                                              bool want_input_grad) {
  if (grad_output.size() != argmax_.size()) {
    throw ConfigError("maxpool gradient shape mismatch");
  }
  if (!want_input_grad) return {};
  BasicTensor<T> out(kept_shape_);
  auto g = grad_output.data();
  auto dst = out.data();
  for (std::size_t q = 0; q < g.size(); ++q) dst[argmax_[q]] += g[q];
  return out;
}

// Flatten

template <typename T>
BasicTensor<T> FlattenLayer<T>::propagate(const BasicTensor<T>& input,
                                          bool keep_state) {
  if (keep_state) kept_shape_ = input.shape();
  return input.reshaped(output_shape(input.shape()));
}

template <typename T>
BasicTensor<T> FlattenLayer<T>::backpropagate(const BasicTensor<T>& grad_output,
                                              bool want_input_grad) {
  if (!want_input_grad) return {};
  return grad_output.reshaped(kept_shape_);
}

// Dense

template <typename T>
DenseLayer<T>::DenseLayer(std::size_t inputs, std::size_t outputs)
    : inputs_(inputs), outputs_(outputs) {
  if (inputs_ == 0 || outputs_ == 0) {
    throw ConfigError("dense layer sizes must be positive");
  }
  weights_.assign(inputs_ * outputs_, T(0));
  bias_.assign(outputs_, T(0));
  weights_grad_.assign(weights_.size(), T(0));
  bias_grad_.assign(bias_.size(), T(0));
}

template <typename T>
void DenseLayer<T>::initialize(std::mt19937& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(inputs_));
  std::uniform_real_distribution<double> dist(-a, a);
  for (auto& w : weights_) w = static_cast<T>(dist(rng));
  std::fill(bias_.begin(), bias_.end(), T(0));
}

template <typename T>
Shape DenseLayer<T>::output_shape(const Shape& input) const {
  if (input.sample() != inputs_) {
    throw ConfigError("dense layer expects " + std::to_string(inputs_) +
                      " inputs per sample but got shape " + to_string(input));
  }
  return {input.n, outputs_, 1, 1};
}

template <typename T>
BasicTensor<T> DenseLayer<T>::propagate(const BasicTensor<T>& input,
                                        bool keep_state) {
  const Shape os = output_shape(input.shape());
  BasicTensor<T> out(os);
  parallel_for(os.n, threads_, [&](std::size_t n) {
    auto x = input.sample(n);
    auto y = out.sample(n);
    for (std::size_t o = 0; o < outputs_; ++o) {
      const T* w = weights_.data() + o * inputs_;
      T acc = T(0);
#pragma omp simd reduction(+ : acc)
      for (std::size_t j = 0; j < inputs_; ++j) acc += w[j] * x[j];
      y[o] = bias_[o] + acc;
    }
  });
  if (keep_state) {
    kept_input_ = input;
    has_state_ = true;
  }
  return out;
}

template <typename T>
BasicTensor<T> DenseLayer<T>::backpropagate(const BasicTensor<T>& grad_output,
                                            bool want_input_grad) {
  if (!has_state_) {
    throw ConfigError("dense backpropagate called without a kept forward pass");
  }
  const Shape& s = kept_input_.shape();
  if (grad_output.shape() != Shape{s.n, outputs_, 1, 1}) {
    throw ConfigError("dense gradient shape mismatch");
  }
  const std::size_t chunks = chunk_count(s.n);
  std::vector<std::vector<T>> wpart(chunks), bpart(chunks);
  parallel_for(chunks, threads_, [&](std::size_t chunk) {
    auto& wg = wpart[chunk];
    auto& bg = bpart[chunk];
    wg.assign(weights_.size(), T(0));
    bg.assign(bias_.size(), T(0));
    const std::size_t n_end = std::min(s.n, (chunk + 1) * kReductionChunk);
    for (std::size_t n = chunk * kReductionChunk; n < n_end; ++n) {
      auto x = kept_input_.sample(n);
      auto e = grad_output.sample(n);
      for (std::size_t o = 0; o < outputs_; ++o) {
        const T eo = e[o];
        bg[o] += eo;
        if (eo == T(0)) continue;
        T* g = wg.data() + o * inputs_;
        for (std::size_t j = 0; j < inputs_; ++j) g[j] += eo * x[j];
      }
    }
  });
  for (std::size_t chunk = 0; chunk < chunks; ++chunk) {
    for (std::size_t q = 0; q < weights_.size(); ++q) {
      weights_grad_[q] += wpart[chunk][q];
    }
    for (std::size_t q = 0; q < bias_.size(); ++q) bias_grad_[q] += bpart[chunk][q];
  }
  if (!want_input_grad) return {};

  BasicTensor<T> err_in(s);
  parallel_for(s.n, threads_, [&](std::size_t n) {
    auto e = grad_output.sample(n);
    auto dx = err_in.sample(n);
    for (std::size_t o = 0; o < outputs_; ++o) {
      const T eo = e[o];
      if (eo == T(0)) continue;
      const T* w = weights_.data() + o * inputs_;
      for (std::size_t j = 0; j < inputs_; ++j) dx[j] += eo * w[j];
    }
  });
  return err_in;
}

template <typename T>
std::vector<ParamBlock<T>> DenseLayer<T>::parameters() {
  return {
      {"dense.weights", weights_, weights_grad_, DecayGroup::kDense},
      {"dense.bias", bias_, bias_grad_, DecayGroup::kNone},
  };
}

template <typename T>
std::unique_ptr<Layer<T>> DenseLayer<T>::clone() const {
  auto copy = std::make_unique<DenseLayer<T>>(*this);
  copy->kept_input_ = {};
  copy->has_state_ = false;
  return copy;
}

// Loss

template <typename T>
LossResult<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                    std::span<const int> labels) {
  const Shape& s = logits.shape();
  if (labels.size() != s.n) {
    throw ConfigError("softmax cross-entropy got " +
                      std::to_string(labels.size()) + " labels for batch " +
                      std::to_string(s.n));
  }
  if (s.n == 0) throw ConfigError("softmax cross-entropy on an empty batch");
  const std::size_t classes = s.sample();
  LossResult<T> result{0.0, BasicTensor<T>(s)};
  const double inv_n = 1.0 / static_cast<double>(s.n);
  for (std::size_t n = 0; n < s.n; ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= classes) {
      throw ConfigError("label " + std::to_string(labels[n]) +
                        " outside [0, " + std::to_string(classes) + ")");
    }
    auto z = logits.sample(n);
    auto d = result.dlogits.sample(n);
    const double peak = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      total += std::exp(static_cast<double>(z[c]) - peak);
    }
    const double log_total = std::log(total);
    const auto label = static_cast<std::size_t>(labels[n]);
    result.loss += (log_total - (static_cast<double>(z[label]) - peak)) * inv_n;
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(static_cast<double>(z[c]) - peak - log_total);
      d[c] = static_cast<T>((p - (c == label ? 1.0 : 0.0)) * inv_n);
    }
  }
  return result;
}

template <typename T>
std::vector<int> argmax_rows(const BasicTensor<T>& logits) {
  std::vector<int> out(logits.shape().n);
  for (std::size_t n = 0; n < out.size(); ++n) {
    auto z = logits.sample(n);
    out[n] = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  }
  return out;
}

template class ReluLayer<float>;
template class ReluLayer<double>;
template class MaxPoolLayer<float>;
template class MaxPoolLayer<double>;
template class FlattenLayer<float>;
template class FlattenLayer<double>;
template class DenseLayer<float>;
template class DenseLayer<double>;
template LossResult<float> softmax_cross_entropy(const Tensor&,
                                                 std::span<const int>);
template LossResult<double> softmax_cross_entropy(const Tensor64&,
                                                  std::span<const int>);
template std::vector<int> argmax_rows(const Tensor&);
template std::vector<int> argmax_rows(const Tensor64&);

}  // namespace ferns
