#include "ferns/fern_layer.hpp"

#include <algorithm>
#include <cmath>

#include "ferns/error.hpp"
#include "ferns/parallel.hpp"

namespace ferns {

template <typename T>
std::uint32_t compute_index(const BasicTensor<T>& input, std::size_t n,
                            std::size_t i, std::ptrdiff_t y, std::ptrdiff_t x,
                            const IndexPattern& pattern) {
  const T centre = input.padded(n, i, y, x);
  std::uint32_t index = 0;
  const auto& offsets = pattern.offsets();
  for (std::size_t m = 0; m < offsets.size(); ++m) {
    if (centre > input.padded(n, i, y + offsets[m].dy, x + offsets[m].dx)) {
      index |= std::uint32_t{1} << m;
    }
  }
  return index;
}

template std::uint32_t compute_index(const Tensor&, std::size_t, std::size_t,
                                     std::ptrdiff_t, std::ptrdiff_t,
                                     const IndexPattern&);
template std::uint32_t compute_index(const Tensor64&, std::size_t,
                                     std::size_t, std::ptrdiff_t,
                                     std::ptrdiff_t, const IndexPattern&);

std::uint64_t param_count(std::size_t in_depth, std::size_t out_depth,
                          const PatternSet& patterns) {
  return static_cast<std::uint64_t>(in_depth) * patterns.weights_per_pair() *
             out_depth +
         out_depth;
}

OpCounter predicted_ops(const Shape& input, std::size_t out_depth,
                        const PatternSet& patterns) {
  const std::uint64_t positions =
      static_cast<std::uint64_t>(input.n) * input.h * input.w;
  const std::uint64_t volume = positions * input.c;
  OpCounter ops;
  ops.comparisons = volume * patterns.comparisons_per_position();
  ops.mults = volume * patterns.width() * out_depth;
  ops.adds = ops.mults;
  ops.bias_adds = positions * out_depth;
  return ops;
}

template <typename T>
FernLayer<T>::FernLayer(std::size_t in_depth, std::size_t out_depth,
                        PatternSet patterns, Padding padding)
    : in_depth_(in_depth),
      out_depth_(out_depth),
      patterns_(std::move(patterns)),
      padding_(padding) {
  if (in_depth_ == 0 || out_depth_ == 0) {
    throw ConfigError("fern layer depths must be positive");
  }
  std::size_t offset = 0;
  for (const auto& p : patterns_.patterns()) {
    branch_offset_.push_back(offset);
    offset += p.distribution_size();
  }
  weights_.assign(out_depth_ * in_depth_ * block_size(), T(0));
  bias_.assign(out_depth_, T(0));
  weights_grad_.assign(weights_.size(), T(0));
  bias_grad_.assign(bias_.size(), T(0));
}

template <typename T>
std::uint64_t FernLayer<T>::param_count() const {
  return ferns::param_count(in_depth_, out_depth_, patterns_);
}

template <typename T>
std::span<T> FernLayer<T>::distribution(std::size_t l, std::size_t i,
                                        std::size_t k) {
  return std::span<T>(weights_).subspan(
      (l * in_depth_ + i) * block_size() + branch_offset_[k],
      patterns_[k].distribution_size());
}

template <typename T>
std::span<const T> FernLayer<T>::distribution(std::size_t l, std::size_t i,
                                              std::size_t k) const {
  return std::span<const T>(weights_).subspan(
      (l * in_depth_ + i) * block_size() + branch_offset_[k],
      patterns_[k].distribution_size());
}

template <typename T>
void FernLayer<T>::initialize(std::mt19937& rng) {
  const double a =
      std::sqrt(6.0 / static_cast<double>(in_depth_ * patterns_.width()));
  std::uniform_real_distribution<double> dist(-a, a);
  for (auto& w : weights_) w = static_cast<T>(dist(rng));
  std::fill(bias_.begin(), bias_.end(), T(0));
}

template <typename T>
Shape FernLayer<T>::output_shape(const Shape& input) const {
  if (input.c != in_depth_) {
    throw ConfigError("fern layer expects depth " + std::to_string(in_depth_) +
                      " but input has shape " + to_string(input));
  }
  if (padding_ == Padding::kZero) return {input.n, out_depth_, input.h, input.w};
  const auto trim = static_cast<std::size_t>(2 * patterns_.radius());
  if (input.h <= trim || input.w <= trim) {
    throw ConfigError("input " + to_string(input) +
                      " is smaller than the unpadded pattern window");
  }
  return {input.n, out_depth_, input.h - trim, input.w - trim};
}

template <typename T>
void FernLayer<T>::check_input(const BasicTensor<T>& input) const {
  const Shape& s = input.shape();
  if (s.c != in_depth_) {
    throw ConfigError("fern layer expects depth " + std::to_string(in_depth_) +
                      " but input has shape " + to_string(s));
  }
  if (s.n > 0 && (s.h == 0 || s.w == 0)) {
    throw ConfigError("fern layer input needs non-empty spatial dims");
  }
}

template <typename T>
void FernLayer<T>::check_error(const IndexCache& cache,
                               const BasicTensor<T>& err_out) const {
  const Shape want{cache.input.n, out_depth_, cache.out_h, cache.out_w};
  if (err_out.shape() != want) {
    throw ConfigError("fern error tensor has shape " +
                      to_string(err_out.shape()) + ", expected " +
                      to_string(want));
  }
}

template <typename T>
IndexCache FernLayer<T>::compute_indices(const BasicTensor<T>& input) {
  check_input(input);
  const Shape& s = input.shape();
  const Shape out = output_shape(s);
  const std::size_t b = patterns_.width();
  const int r = patterns_.radius();
  const std::size_t trim =
      padding_ == Padding::kNone ? static_cast<std::size_t>(r) : 0;

  IndexCache cache;
  cache.input = s;
  cache.branches = b;
  cache.out_h = out.h;
  cache.out_w = out.w;
  cache.trim = trim;
  cache.index.assign(s.n * s.c * b * cache.out_plane(), 0);

  const std::size_t pw = s.w + 2 * static_cast<std::size_t>(r);
  const std::size_t ph = s.h + 2 * static_cast<std::size_t>(r);
  std::vector<std::uint64_t> compares(s.n, 0);

  parallel_for(s.n, threads_, [&](std::size_t n) {
    std::vector<T> padded(ph * pw, T(0));
    for (std::size_t i = 0; i < s.c; ++i) {
      auto src = input.plane(n, i);
      for (std::size_t y = 0; y < s.h; ++y) {
        std::copy_n(src.data() + y * s.w, s.w,
                    padded.data() + (y + r) * pw + r);
      }
      for (std::size_t k = 0; k < b; ++k) {
        const auto& offsets = patterns_[k].offsets();
        auto* idx = cache.index.data() +
                    ((n * s.c + i) * b + k) * cache.out_plane();
        for (std::size_t oy = 0; oy < cache.out_h; ++oy) {
          const T* centre = padded.data() + (oy + trim + r) * pw + trim + r;
          std::uint16_t* row = idx + oy * cache.out_w;
          for (std::size_t m = 0; m < offsets.size(); ++m) {
            const T* nb = centre + offsets[m].dy * static_cast<std::ptrdiff_t>(pw) +
                          offsets[m].dx;
            const auto bit = static_cast<std::uint16_t>(1u << m);
            for (std::size_t ox = 0; ox < cache.out_w; ++ox) {
              row[ox] |= centre[ox] > nb[ox] ? bit : std::uint16_t{0};
            }
          }
          compares[n] += cache.out_w * offsets.size();
        }
      }
    }
  });
  for (auto c : compares) counters_.comparisons += c;
  return cache;
}

template <typename T>
BasicTensor<T> FernLayer<T>::forward(const BasicTensor<T>& input) {
  const IndexCache cache = compute_indices(input);
  return forward(input, cache);
}

template <typename T>
BasicTensor<T> FernLayer<T>::forward(const BasicTensor<T>& input,
                                     const IndexCache& cache) {
  check_input(input);
  if (cache.input != input.shape()) {
    throw ConfigError("index cache does not match input shape");
  }
  const Shape& s = input.shape();
  BasicTensor<T> out({s.n, out_depth_, cache.out_h, cache.out_w});
  const std::size_t b = patterns_.width();
  const std::size_t plane = cache.out_plane();
  std::vector<OpCounter> tallies(s.n);

  parallel_for(s.n, threads_, [&](std::size_t n) {
    OpCounter& tally = tallies[n];
    for (std::size_t l = 0; l < out_depth_; ++l) {
      auto o = out.plane(n, l);
      std::fill(o.begin(), o.end(), bias_[l]);
      tally.bias_adds += plane;
      for (std::size_t i = 0; i < in_depth_; ++i) {
        auto in = input.plane(n, i);
        for (std::size_t k = 0; k < b; ++k) {
          const T* w = distribution(l, i, k).data();
          const std::uint16_t* idx = cache.row(n, i, k);
          for (std::size_t oy = 0; oy < cache.out_h; ++oy) {
            const T* c = in.data() + (oy + cache.trim) * s.w + cache.trim;
            const std::uint16_t* ir = idx + oy * cache.out_w;
            T* orow = o.data() + oy * cache.out_w;
            for (std::size_t ox = 0; ox < cache.out_w; ++ox) {
              orow[ox] += c[ox] * w[ir[ox]];
            }
          }
          tally.mults += plane;
          tally.adds += plane;
        }
      }
    }
  });
  for (const auto& t : tallies) counters_ += t;
  return out;
}

template <typename T>
BasicTensor<T> FernLayer<T>::backward_input(const BasicTensor<T>& input,
                                            const BasicTensor<T>& err_out,
                                            bool heuristic) {
  const IndexCache cache = compute_indices(input);
  return backward_input(input, err_out, heuristic, cache);
}

template <typename T>
BasicTensor<T> FernLayer<T>::backward_input(const BasicTensor<T>& input,
                                            const BasicTensor<T>& err_out,
                                            bool heuristic,
                                            const IndexCache& cache) const {
  check_input(input);
  check_error(cache, err_out);
  const Shape& s = input.shape();
  BasicTensor<T> err_in(s);
  const std::size_t b = patterns_.width();
  const std::size_t plane = cache.out_plane();

  parallel_for(s.n, threads_, [&](std::size_t n) {
    std::vector<T> routed(plane);
    for (std::size_t i = 0; i < in_depth_; ++i) {
      auto ei = err_in.plane(n, i);
      for (std::size_t k = 0; k < b; ++k) {
        const std::uint16_t* idx = cache.row(n, i, k);
        std::fill(routed.begin(), routed.end(), T(0));
        for (std::size_t l = 0; l < out_depth_; ++l) {
          const T* w = distribution(l, i, k).data();
          auto e = err_out.plane(n, l);
          for (std::size_t p = 0; p < plane; ++p) routed[p] += e[p] * w[idx[p]];
        }
        for (std::size_t oy = 0; oy < cache.out_h; ++oy) {
          T* row = ei.data() + (oy + cache.trim) * s.w + cache.trim;
          const T* src = routed.data() + oy * cache.out_w;
          for (std::size_t ox = 0; ox < cache.out_w; ++ox) row[ox] += src[ox];
        }
        if (!heuristic) continue;
        const auto& offsets = patterns_[k].offsets();
        const auto participants = static_cast<T>(offsets.size());
        for (const Offset& off : offsets) {
          for (std::size_t oy = 0; oy < cache.out_h; ++oy) {
            const auto ty = static_cast<std::ptrdiff_t>(oy + cache.trim) + off.dy;
            if (ty < 0 || ty >= static_cast<std::ptrdiff_t>(s.h)) continue;
            T* row = ei.data() + static_cast<std::size_t>(ty) * s.w;
            const T* src = routed.data() + oy * cache.out_w;
            for (std::size_t ox = 0; ox < cache.out_w; ++ox) {
              const auto tx = static_cast<std::ptrdiff_t>(ox + cache.trim) + off.dx;
              if (tx < 0 || tx >= static_cast<std::ptrdiff_t>(s.w)) continue;
              row[tx] += src[ox] / participants;
            }
          }
        }
      }
    }
  });
  return err_in;
}

template <typename T>
void FernLayer<T>::accumulate_grads(const BasicTensor<T>& input,
                                    const BasicTensor<T>& err_out,
                                    const IndexCache& cache,
                                    std::span<T> dist_grad,
                                    std::span<T> bias_grad) const {
  const Shape& s = input.shape();
  const std::size_t b = patterns_.width();
  const std::size_t plane = cache.out_plane();
  const std::size_t chunks = chunk_count(s.n);
  if (chunks == 0) return;

  std::vector<std::vector<T>> dist_part(chunks);
  std::vector<std::vector<T>> bias_part(chunks);
  parallel_for(chunks, threads_, [&](std::size_t chunk) {
    auto& dg = dist_part[chunk];
    auto& bg = bias_part[chunk];
    dg.assign(dist_grad.size(), T(0));
    bg.assign(bias_grad.size(), T(0));
    const std::size_t n_end = std::min(s.n, (chunk + 1) * kReductionChunk);
    for (std::size_t n = chunk * kReductionChunk; n < n_end; ++n) {
      for (std::size_t l = 0; l < out_depth_; ++l) {
        auto e = err_out.plane(n, l);
        T total = T(0);
        for (std::size_t p = 0; p < plane; ++p) total += e[p];
        bg[l] += total;
        for (std::size_t i = 0; i < in_depth_; ++i) {
          auto in = input.plane(n, i);
          for (std::size_t k = 0; k < b; ++k) {
            T* g = dg.data() + (l * in_depth_ + i) * block_size() +
                   branch_offset_[k];
            const std::uint16_t* idx = cache.row(n, i, k);
            for (std::size_t oy = 0; oy < cache.out_h; ++oy) {
              const T* c = in.data() + (oy + cache.trim) * s.w + cache.trim;
              const T* er = e.data() + oy * cache.out_w;
              const std::uint16_t* ir = idx + oy * cache.out_w;
              for (std::size_t ox = 0; ox < cache.out_w; ++ox) {
                g[ir[ox]] += c[ox] * er[ox];
              }
            }
          }
        }
      }
    }
  });
  for (std::size_t chunk = 0; chunk < chunks; ++chunk) {
    for (std::size_t q = 0; q < dist_grad.size(); ++q) {
      dist_grad[q] += dist_part[chunk][q];
    }
    for (std::size_t q = 0; q < bias_grad.size(); ++q) {
      bias_grad[q] += bias_part[chunk][q];
    }
  }
}

template <typename T>
FernGradients<T> FernLayer<T>::grad_weights(const BasicTensor<T>& input,
                                            const BasicTensor<T>& err_out) {
  const IndexCache cache = compute_indices(input);
  return grad_weights(input, err_out, cache);
}

template <typename T>
FernGradients<T> FernLayer<T>::grad_weights(const BasicTensor<T>& input,
                                            const BasicTensor<T>& err_out,
                                            const IndexCache& cache) const {
  check_input(input);
  check_error(cache, err_out);
  FernGradients<T> g;
  g.distributions.assign(weights_.size(), T(0));
  g.bias.assign(bias_.size(), T(0));
  accumulate_grads(input, err_out, cache, g.distributions, g.bias);
  return g;
}

template <typename T>
BasicTensor<T> FernLayer<T>::propagate(const BasicTensor<T>& input,
                                       bool keep_state) {
  IndexCache cache = compute_indices(input);
  BasicTensor<T> out = forward(input, cache);
  if (keep_state) {
    kept_input_ = input;
    kept_indices_ = cache_indices_ ? std::move(cache) : IndexCache{};
    has_state_ = true;
  }
  return out;
}

template <typename T>
BasicTensor<T> FernLayer<T>::backpropagate(const BasicTensor<T>& grad_output,
                                           bool want_input_grad) {
  if (!has_state_) {
    throw ConfigError("fern backpropagate called without a kept forward pass");
  }
  IndexCache recomputed;
  if (!cache_indices_) {
    // Recomputation does not touch the op counters.
    const OpCounter saved = counters_;
    recomputed = compute_indices(kept_input_);
    counters_ = saved;
  }
  const IndexCache& cache = cache_indices_ ? kept_indices_ : recomputed;
  check_error(cache, grad_output);
  accumulate_grads(kept_input_, grad_output, cache, weights_grad_, bias_grad_);
  BasicTensor<T> err_in;
  if (want_input_grad) {
    err_in = backward_input(kept_input_, grad_output, heuristic_, cache);
  }
  return err_in;
}

template <typename T>
std::vector<ParamBlock<T>> FernLayer<T>::parameters() {
  return {
      {"fern.distributions", weights_, weights_grad_, DecayGroup::kFern},
      {"fern.bias", bias_, bias_grad_, DecayGroup::kNone},
  };
}

template <typename T>
std::unique_ptr<Layer<T>> FernLayer<T>::clone() const {
  auto copy = std::make_unique<FernLayer<T>>(*this);
  copy->kept_input_ = {};
  copy->kept_indices_ = {};
  copy->has_state_ = false;
  return copy;
}

template class FernLayer<float>;
template class FernLayer<double>;

}  // namespace ferns
