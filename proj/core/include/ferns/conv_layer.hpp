#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ferns/layer.hpp"
#include "ferns/op_counter.hpp"
#include "ferns/tensor.hpp"

namespace ferns {

/// z * c_y * c_x * L + L.
std::uint64_t conv_param_count(std::size_t in_depth, std::size_t out_depth,
                               std::size_t kernel_h, std::size_t kernel_w);

/// t_x*t_y*t_z*n*c_x*c_y multiplications and additions; bias additions in
/// `bias_adds`.
OpCounter predicted_conv_ops(const Shape& input, std::size_t out_depth,
                             std::size_t kernel_h, std::size_t kernel_w);

template <typename T>
struct ConvGradients {
  std::vector<T> weights;
  std::vector<T> bias;
};

/// Direct stride-1 cross-correlation with zero "same" padding.
///
/// Each batch item is copied into a zero-bordered buffer so every output
/// position runs the full c_y*c_x window; the op counters therefore record
/// exactly the executed multiply-adds.
template <typename T>
class ConvLayer final : public Layer<T> {
 public:
  ConvLayer(std::size_t in_depth, std::size_t out_depth, std::size_t kernel_h,
            std::size_t kernel_w);

  std::size_t in_depth() const { return in_depth_; }
  std::size_t out_depth() const { return out_depth_; }
  std::size_t kernel_h() const { return kh_; }
  std::size_t kernel_w() const { return kw_; }
  std::uint64_t param_count() const;

  /// Layout (L, z, c_y, c_x).
  std::span<T> weights() { return weights_; }
  std::span<const T> weights() const { return weights_; }
  std::span<T> bias() { return bias_; }
  std::span<const T> bias() const { return bias_; }
  T& weight(std::size_t l, std::size_t i, std::size_t ky, std::size_t kx) {
    return weights_[((l * in_depth_ + i) * kh_ + ky) * kw_ + kx];
  }

  /// He-uniform weights, a = sqrt(6 / (z * c_y * c_x)); zero bias.
  void initialize(std::mt19937& rng);

  OpCounter& counters() { return counters_; }
  const OpCounter& counters() const { return counters_; }

  Shape output_shape(const Shape& input) const override;

  BasicTensor<T> forward(const BasicTensor<T>& input);
  /// Adjoint of forward: returns d(loss)/d(input) and fills `grads` when
  /// non-null (accumulating into whatever it already holds).
  BasicTensor<T> backward(const BasicTensor<T>& input,
                          const BasicTensor<T>& err_out,
                          ConvGradients<T>* grads, bool want_input_grad = true) const;

  LayerKind kind() const override { return LayerKind::kConv; }
  BasicTensor<T> propagate(const BasicTensor<T>& input,
                           bool keep_state) override;
  BasicTensor<T> backpropagate(const BasicTensor<T>& grad_output,
                               bool want_input_grad) override;
  std::vector<ParamBlock<T>> parameters() override;
  std::unique_ptr<Layer<T>> clone() const override;
  void set_threads(int threads) override { threads_ = threads; }

 private:
  void check_input(const Shape& s) const;
  void accumulate(const BasicTensor<T>& input, const BasicTensor<T>& err_out,
                  std::span<T> wgrad, std::span<T> bgrad) const;

  std::size_t in_depth_;
  std::size_t out_depth_;
  std::size_t kh_;
  std::size_t kw_;
  std::vector<T> weights_;
  std::vector<T> bias_;
  std::vector<T> weights_grad_;
  std::vector<T> bias_grad_;
  int threads_ = 1;
  OpCounter counters_;

  BasicTensor<T> kept_input_;
  bool has_state_ = false;
};

extern template class ConvLayer<float>;
extern template class ConvLayer<double>;

}  // namespace ferns
