#include "ferns/model.hpp"

#include <random>

#include "ferns/error.hpp"

namespace ferns {

template <typename T>
Model<T>::Model(const Model& other) : input_shape_(other.input_shape_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Model<T>& Model<T>::operator=(const Model& other) {
  if (this != &other) *this = Model(other);
  return *this;
}

template <typename T>
Layer<T>& Model<T>::add(std::unique_ptr<Layer<T>> layer) {
  if (input_shape_.size() != 0) {
    Shape s = output_shape({1, input_shape_.c, input_shape_.h, input_shape_.w});
    (void)layer->output_shape(s);  // throws on mismatch
  }
  layers_.push_back(std::move(layer));
  return *layers_.back();
}

template <typename T>
Shape Model<T>::output_shape(const Shape& input) const {
  Shape s = input;
  for (const auto& l : layers_) s = l->output_shape(s);
  return s;
}

template <typename T>
BasicTensor<T> Model<T>::forward(const BasicTensor<T>& input, bool keep_state) {
  if (layers_.empty()) return input;
  BasicTensor<T> x = layers_.front()->propagate(input, keep_state);
  for (std::size_t q = 1; q < layers_.size(); ++q) {
    x = layers_[q]->propagate(x, keep_state);
  }
  return x;
}

template <typename T>
void Model<T>::backward(const BasicTensor<T>& grad_output) {
  if (layers_.empty()) return;
  BasicTensor<T> g = grad_output;
  for (std::size_t q = layers_.size(); q-- > 0;) {
    g = layers_[q]->backpropagate(g, q > 0);
  }
}

template <typename T>
std::vector<ParamBlock<T>> Model<T>::parameters() {
  std::vector<ParamBlock<T>> all;
  for (std::size_t q = 0; q < layers_.size(); ++q) {
    for (auto& p : layers_[q]->parameters()) {
      p.name = std::to_string(q) + "." + p.name;
      all.push_back(std::move(p));
    }
  }
  return all;
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& p : parameters()) std::fill(p.grad.begin(), p.grad.end(), T(0));
}

template <typename T>
void Model<T>::set_threads(int threads) {
  for (auto& l : layers_) l->set_threads(threads);
}

template <typename T>
void Model<T>::set_heuristic_backprop(bool on) {
  for (auto& l : layers_) {
    if (auto* fern = dynamic_cast<FernLayer<T>*>(l.get())) {
      fern->set_heuristic_backprop(on);
    }
  }
}

template <typename T>
std::uint64_t Model<T>::count_parameters(LayerKind kind) const {
  std::uint64_t total = 0;
  for (const auto& l : layers_) {
    if (l->kind() != kind) continue;
    for (const auto& p : l->parameters()) total += p.value.size();
  }
  return total;
}

template <typename T>
std::uint64_t Model<T>::count_parameters() const {
  std::uint64_t total = 0;
  for (const auto& l : layers_) {
    for (const auto& p : l->parameters()) total += p.value.size();
  }
  return total;
}

namespace {

template <typename T>
Model<T> lenet5(const PatternSet* patterns, std::uint32_t seed,
                std::size_t classes) {
  std::mt19937 rng(seed);
  Model<T> model;
  model.set_input_shape({1, 1, 28, 28});

  auto spatial = [&](std::size_t in, std::size_t out) {
    if (patterns) {
      model.template emplace<FernLayer<T>>(in, out, *patterns).initialize(rng);
    } else {
      model.template emplace<ConvLayer<T>>(in, out, 5, 5).initialize(rng);
    }
    model.template emplace<ReluLayer<T>>();
    model.template emplace<MaxPoolLayer<T>>();
  };
  spatial(1, 6);
  spatial(6, 16);
  model.template emplace<FlattenLayer<T>>();
  const std::size_t flat = model.output_shape({1, 1, 28, 28}).sample();
  model.template emplace<DenseLayer<T>>(flat, 120).initialize(rng);
  model.template emplace<ReluLayer<T>>();
  model.template emplace<DenseLayer<T>>(120, 84).initialize(rng);
  model.template emplace<ReluLayer<T>>();
  model.template emplace<DenseLayer<T>>(84, classes).initialize(rng);
  return model;
}

}  // namespace

template <typename T>
Model<T> build_lenet5(std::string_view kind, std::uint32_t seed,
                      std::size_t classes) {
  if (kind == "conv") return lenet5<T>(nullptr, seed, classes);
  if (kind == "TI1" || kind == "TI2" || kind == "TI3") {
    const PatternSet patterns = builtin_pattern(kind);
    return lenet5<T>(&patterns, seed, classes);
  }
  throw ConfigError("unknown model kind '" + std::string(kind) +
                    "' (valid: conv, TI1, TI2, TI3)");
}

template <typename T>
Model<T> build_lenet5(const PatternSet& patterns, std::uint32_t seed,
                      std::size_t classes) {
  return lenet5<T>(&patterns, seed, classes);
}

template class Model<float>;
template class Model<double>;
template Model<float> build_lenet5(std::string_view, std::uint32_t,
                                   std::size_t);
template Model<double> build_lenet5(std::string_view, std::uint32_t,
                                    std::size_t);
template Model<float> build_lenet5(const PatternSet&, std::uint32_t,
                                   std::size_t);
template Model<double> build_lenet5(const PatternSet&, std::uint32_t,
                                    std::size_t);

}  // namespace ferns
