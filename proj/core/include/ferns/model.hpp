#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "ferns/conv_layer.hpp"
#include "ferns/fern_layer.hpp"
#include "ferns/layers.hpp"

namespace ferns {

/// Sequential stack of layers with uniform parameter access.
template <typename T>
class Model {
 public:
  Model() = default;
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  /// Appends a layer, checking it accepts the current output shape when an
  /// input shape has been declared.
  Layer<T>& add(std::unique_ptr<Layer<T>> layer);

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    return static_cast<L&>(add(std::make_unique<L>(std::forward<Args>(args)...)));
  }

  /// Per-sample input shape (n is ignored).
  void set_input_shape(Shape s) { input_shape_ = s; }
  const Shape& input_shape() const { return input_shape_; }
  Shape output_shape(const Shape& input) const;

  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t q) { return *layers_[q]; }
  const Layer<T>& layer(std::size_t q) const { return *layers_[q]; }

  BasicTensor<T> forward(const BasicTensor<T>& input, bool keep_state = false);
  /// Backpropagates d(loss)/d(output); parameter gradients accumulate.
  void backward(const BasicTensor<T>& grad_output);

  /// Blocks are named "<layer index>.<layer param>".
  std::vector<ParamBlock<T>> parameters();
  void zero_grad();
  void set_threads(int threads);
  /// Applies FernLayer::set_heuristic_backprop to every fern layer.
  void set_heuristic_backprop(bool on);

  /// Total parameter count of layers of the given kind.
  std::uint64_t count_parameters(LayerKind kind) const;
  std::uint64_t count_parameters() const;

 private:
  Shape input_shape_{};
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// LeNet-5 with ReLU for 28x28x1 inputs.
///
/// kind "conv": 5x5 conv 1->6, relu, pool, 5x5 conv 6->16, relu, pool,
/// dense 784->120, relu, dense 120->84, relu, dense 84->classes. Kinds "TI1",
/// "TI2", "TI3" replace both convolutions by fern layers with that pattern
/// set. All spatial layers keep size, so the first dense layer sees 16*7*7.
template <typename T>
Model<T> build_lenet5(std::string_view kind, std::uint32_t seed,
                      std::size_t classes = 10);

/// Same topology with an explicit pattern set for the fern layers.
template <typename T>
Model<T> build_lenet5(const PatternSet& patterns, std::uint32_t seed,
                      std::size_t classes = 10);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace ferns
