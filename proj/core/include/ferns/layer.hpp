#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ferns/tensor.hpp"

namespace ferns {

enum class LayerKind : std::uint32_t {
  kFern = 1,
  kConv = 2,
  kRelu = 3,
  kMaxPool = 4,
  kDense = 5,
  kFlatten = 6,
};

const char* to_string(LayerKind kind);

/// Which weight-decay setting a parameter block follows.
enum class DecayGroup { kNone, kConv, kFern, kDense };

/// A view of one trainable array and its gradient accumulator.
template <typename T>
struct ParamBlock {
  std::string name;
  std::span<T> value;
  std::span<T> grad;
  DecayGroup decay = DecayGroup::kNone;
};

/// Uniform interface used by Model for training and inference.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;

  /// Forward pass. With `keep_state` set, retains what backpropagate needs.
  virtual BasicTensor<T> propagate(const BasicTensor<T>& input,
                                   bool keep_state) = 0;

  /// Adds parameter gradients for the last kept forward pass and returns
  /// d(loss)/d(input), or an empty tensor if `want_input_grad` is false.
  virtual BasicTensor<T> backpropagate(const BasicTensor<T>& grad_output,
                                       bool want_input_grad) = 0;

  virtual std::vector<ParamBlock<T>> parameters() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual void set_threads(int /*threads*/) {}
};

}  // namespace ferns
