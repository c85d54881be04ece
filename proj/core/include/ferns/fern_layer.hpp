#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ferns/index_pattern.hpp"
#include "ferns/layer.hpp"
#include "ferns/op_counter.hpp"
#include "ferns/tensor.hpp"

namespace ferns {

/// kZero: out-of-plane neighbours read as 0 and the output keeps the input's
/// spatial size. kNone: only centres whose whole window is inside the plane
/// produce output, shrinking each side by the pattern radius.
enum class Padding { kZero, kNone };

/// Distribution index of one window: bit m is set iff the centre value is
/// strictly greater than the (zero-padded) neighbour at offset m.
template <typename T>
std::uint32_t compute_index(const BasicTensor<T>& input, std::size_t n,
                            std::size_t i, std::ptrdiff_t y, std::ptrdiff_t x,
                            const IndexPattern& pattern);

/// Indices for every (n, i, k, output position) of one input.
struct IndexCache {
  Shape input{};
  std::size_t branches = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  std::size_t trim = 0;
  std::vector<std::uint16_t> index;

  std::size_t out_plane() const { return out_h * out_w; }
  const std::uint16_t* row(std::size_t n, std::size_t i, std::size_t k) const {
    return index.data() + ((n * input.c + i) * branches + k) * out_plane();
  }
};

template <typename T>
struct FernGradients {
  std::vector<T> distributions;  // same layout as FernLayer::weights()
  std::vector<T> bias;
};

/// Weight count of one fern layer: z * sum_k 2^|BD_k| * L + L.
std::uint64_t param_count(std::size_t in_depth, std::size_t out_depth,
                          const PatternSet& patterns);

/// Closed-form operation counts for one forward pass over a t_y x t_x x t_z
/// input: comparisons t_x*t_y*t_z*sum|BD_k|, mults and adds t_x*t_y*t_z*b*L.
/// Bias additions are returned in `bias_adds`.
OpCounter predicted_ops(const Shape& input, std::size_t out_depth,
                        const PatternSet& patterns);

/// Decision-tree layer replacing a convolution.
///
/// Each (output l, input depth i, branch k) owns a distribution of
/// 2^|BD_k| weights. At every position the branch index is computed once per
/// (i, k) from comparisons with the central value and is shared by all L
/// output layers; the selected weight is multiplied by the central value.
template <typename T>
class FernLayer final : public Layer<T> {
 public:
  FernLayer(std::size_t in_depth, std::size_t out_depth, PatternSet patterns,
            Padding padding = Padding::kZero);

  std::size_t in_depth() const { return in_depth_; }
  std::size_t out_depth() const { return out_depth_; }
  const PatternSet& patterns() const { return patterns_; }
  Padding padding() const { return padding_; }
  std::uint64_t param_count() const;

  std::span<T> weights() { return weights_; }
  std::span<const T> weights() const { return weights_; }
  std::span<T> bias() { return bias_; }
  std::span<const T> bias() const { return bias_; }
  std::span<T> distribution(std::size_t l, std::size_t i, std::size_t k);
  std::span<const T> distribution(std::size_t l, std::size_t i,
                                  std::size_t k) const;

  /// Uniform(-a, a) weights with a = sqrt(6 / (z * b)); zero bias.
  void initialize(std::mt19937& rng);

  /// Route error to comparison participants (divided by |BD_k|) in
  /// backpropagate(). On by default.
  void set_heuristic_backprop(bool on) { heuristic_ = on; }
  bool heuristic_backprop() const { return heuristic_; }

  /// When off, backpropagate() recomputes indices instead of keeping them.
  void set_cache_indices(bool on) { cache_indices_ = on; }
  bool cache_indices() const { return cache_indices_; }

  OpCounter& counters() { return counters_; }
  const OpCounter& counters() const { return counters_; }

  Shape output_shape(const Shape& input) const override;

  /// Adds the executed comparisons to counters().
  IndexCache compute_indices(const BasicTensor<T>& input);

  BasicTensor<T> forward(const BasicTensor<T>& input);
  BasicTensor<T> forward(const BasicTensor<T>& input, const IndexCache& cache);

  BasicTensor<T> backward_input(const BasicTensor<T>& input,
                                const BasicTensor<T>& err_out, bool heuristic);
  BasicTensor<T> backward_input(const BasicTensor<T>& input,
                                const BasicTensor<T>& err_out, bool heuristic,
                                const IndexCache& cache) const;

  FernGradients<T> grad_weights(const BasicTensor<T>& input,
                                const BasicTensor<T>& err_out);
  FernGradients<T> grad_weights(const BasicTensor<T>& input,
                                const BasicTensor<T>& err_out,
                                const IndexCache& cache) const;

  LayerKind kind() const override { return LayerKind::kFern; }
  BasicTensor<T> propagate(const BasicTensor<T>& input,
                           bool keep_state) override;
  BasicTensor<T> backpropagate(const BasicTensor<T>& grad_output,
                               bool want_input_grad) override;
  std::vector<ParamBlock<T>> parameters() override;
  std::unique_ptr<Layer<T>> clone() const override;
  void set_threads(int threads) override { threads_ = threads; }

 private:
  std::size_t block_size() const { return patterns_.weights_per_pair(); }
  void check_input(const BasicTensor<T>& input) const;
  void check_error(const IndexCache& cache, const BasicTensor<T>& err_out) const;
  void accumulate_grads(const BasicTensor<T>& input,
                        const BasicTensor<T>& err_out, const IndexCache& cache,
                        std::span<T> dist_grad, std::span<T> bias_grad) const;

  std::size_t in_depth_;
  std::size_t out_depth_;
  PatternSet patterns_;
  Padding padding_;
  std::vector<std::size_t> branch_offset_;
  std::vector<T> weights_;
  std::vector<T> bias_;
  std::vector<T> weights_grad_;
  std::vector<T> bias_grad_;

  bool heuristic_ = true;
  bool cache_indices_ = true;
  int threads_ = 1;
  OpCounter counters_;

  BasicTensor<T> kept_input_;
  IndexCache kept_indices_;
  bool has_state_ = false;
};

extern template class FernLayer<float>;
extern template class FernLayer<double>;

}  // namespace ferns
