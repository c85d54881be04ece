#pragma once

#include <random>
#include <vector>

#include "ferns/layer.hpp"

namespace ferns {

template <typename T>
class ReluLayer final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::kRelu; }
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<T> propagate(const BasicTensor<T>& input,
                           bool keep_state) override;
  BasicTensor<T> backpropagate(const BasicTensor<T>& grad_output,
                               bool want_input_grad) override;
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<ReluLayer>();
  }

 private:
  std::vector<std::uint8_t> active_;
  Shape kept_shape_{};
};

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
/// Ties go to the first maximal element in row-major order.
template <typename T>
class MaxPoolLayer final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::kMaxPool; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> propagate(const BasicTensor<T>& input,
                           bool keep_state) override;
  BasicTensor<T> backpropagate(const BasicTensor<T>& grad_output,
                               bool want_input_grad) override;
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<MaxPoolLayer>();
  }

 private:
  std::vector<std::size_t> argmax_;
  Shape kept_shape_{};
};

/// (N, C, H, W) -> (N, C*H*W, 1, 1).
template <typename T>
class FlattenLayer final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::kFlatten; }
  Shape output_shape(const Shape& input) const override {
    return {input.n, input.sample(), 1, 1};
  }
  BasicTensor<T> propagate(const BasicTensor<T>& input,
                           bool keep_state) override;
  BasicTensor<T> backpropagate(const BasicTensor<T>& grad_output,
                               bool want_input_grad) override;
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<FlattenLayer>();
  }

 private:
  Shape kept_shape_{};
};

/// Fully connected layer on (N, in, 1, 1) inputs; weights are (out, in).
template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  DenseLayer(std::size_t inputs, std::size_t outputs);

  std::size_t inputs() const { return inputs_; }
  std::size_t outputs() const { return outputs_; }
  std::span<T> weights() { return weights_; }
  std::span<const T> weights() const { return weights_; }
  std::span<T> bias() { return bias_; }
  std::span<const T> bias() const { return bias_; }

  /// He-uniform weights, a = sqrt(6 / inputs); zero bias.
  void initialize(std::mt19937& rng);

  LayerKind kind() const override { return LayerKind::kDense; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> propagate(const BasicTensor<T>& input,
                           bool keep_state) override;
  BasicTensor<T> backpropagate(const BasicTensor<T>& grad_output,
                               bool want_input_grad) override;
  std::vector<ParamBlock<T>> parameters() override;
  std::unique_ptr<Layer<T>> clone() const override;
  void set_threads(int threads) override { threads_ = threads; }

 private:
  std::size_t inputs_;
  std::size_t outputs_;
  std::vector<T> weights_;
  std::vector<T> bias_;
  std::vector<T> weights_grad_;
  std::vector<T> bias_grad_;
  int threads_ = 1;
  BasicTensor<T> kept_input_;
  bool has_state_ = false;
};

template <typename T>
struct LossResult {
  double loss = 0.0;       // mean over the batch
  BasicTensor<T> dlogits;  // gradient of the mean loss
};

/// Softmax cross-entropy over the C*H*W entries of each batch item.
template <typename T>
LossResult<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                    std::span<const int> labels);

/// Index of the largest logit per batch item (first one on ties).
template <typename T>
std::vector<int> argmax_rows(const BasicTensor<T>& logits);

extern template class ReluLayer<float>;
extern template class ReluLayer<double>;
extern template class MaxPoolLayer<float>;
extern template class MaxPoolLayer<double>;
extern template class FlattenLayer<float>;
extern template class FlattenLayer<double>;
extern template class DenseLayer<float>;
extern template class DenseLayer<double>;

}  // namespace ferns
