#include "ferns/conv_layer.hpp"

#include <algorithm>
#include <cmath>

#include "ferns/error.hpp"
#include "ferns/parallel.hpp"

namespace ferns {

std::uint64_t conv_param_count(std::size_t in_depth, std::size_t out_depth,
                               std::size_t kernel_h, std::size_t kernel_w) {
  return static_cast<std::uint64_t>(in_depth) * kernel_h * kernel_w *
             out_depth +
         out_depth;
}

OpCounter predicted_conv_ops(const Shape& input, std::size_t out_depth,
                             std::size_t kernel_h, std::size_t kernel_w) {
  const std::uint64_t positions =
      static_cast<std::uint64_t>(input.n) * input.h * input.w;
  OpCounter ops;
  ops.mults = positions * input.c * out_depth * kernel_h * kernel_w;
  ops.adds = ops.mults;
  ops.bias_adds = positions * out_depth;
  return ops;
}

namespace {

// Copies sample n into a (C, H + 2*ry, W + 2*rx) zero-bordered buffer.
template <typename T>
void pad_sample(const BasicTensor<T>& input, std::size_t n, std::size_t ry,
                std::size_t rx, std::vector<T>& out) {
  const Shape& s = input.shape();
  const std::size_t ph = s.h + 2 * ry;
  const std::size_t pw = s.w + 2 * rx;
  out.assign(s.c * ph * pw, T(0));
  for (std::size_t c = 0; c < s.c; ++c) {
    auto src = input.plane(n, c);
    for (std::size_t y = 0; y < s.h; ++y) {
      std::copy_n(src.data() + y * s.w, s.w,
                  out.data() + (c * ph + y + ry) * pw + rx);
    }
  }
}

}  // namespace

template <typename T>
ConvLayer<T>::ConvLayer(std::size_t in_depth, std::size_t out_depth,
                        std::size_t kernel_h, std::size_t kernel_w)
    : in_depth_(in_depth), out_depth_(out_depth), kh_(kernel_h), kw_(kernel_w) {
  if (in_depth_ == 0 || out_depth_ == 0) {
    throw ConfigError("conv layer depths must be positive");
  }
  if (kh_ % 2 == 0 || kw_ % 2 == 0) {
    throw ConfigError("conv kernel must have odd extents, got " +
                      std::to_string(kh_) + "x" + std::to_string(kw_));
  }
  weights_.assign(out_depth_ * in_depth_ * kh_ * kw_, T(0));
  bias_.assign(out_depth_, T(0));
  weights_grad_.assign(weights_.size(), T(0));
  bias_grad_.assign(bias_.size(), T(0));
}

template <typename T>
std::uint64_t ConvLayer<T>::param_count() const {
  return conv_param_count(in_depth_, out_depth_, kh_, kw_);
}

template <typename T>
void ConvLayer<T>::initialize(std::mt19937& rng) {
  const double a =
      std::sqrt(6.0 / static_cast<double>(in_depth_ * kh_ * kw_));
  std::uniform_real_distribution<double> dist(-a, a);
  for (auto& w : weights_) w = static_cast<T>(dist(rng));
  std::fill(bias_.begin(), bias_.end(), T(0));
}

template <typename T>
void ConvLayer<T>::check_input(const Shape& s) const {
  if (s.c != in_depth_) {
    throw ConfigError("conv layer expects depth " + std::to_string(in_depth_) +
                      " but input has shape " + to_string(s));
  }
}

template <typename T>
Shape ConvLayer<T>::output_shape(const Shape& input) const {
  check_input(input);
  return {input.n, out_depth_, input.h, input.w};
}

template <typename T>
BasicTensor<T> ConvLayer<T>::forward(const BasicTensor<T>& input) {
  const Shape& s = input.shape();
  check_input(s);
  BasicTensor<T> out({s.n, out_depth_, s.h, s.w});
  const std::size_t ry = kh_ / 2, rx = kw_ / 2;
  const std::size_t ph = s.h + 2 * ry, pw = s.w + 2 * rx;
  std::vector<OpCounter> tallies(s.n);

  parallel_for(s.n, threads_, [&](std::size_t n) {
    std::vector<T> padded;
    pad_sample(input, n, ry, rx, padded);
    OpCounter& tally = tallies[n];
    for (std::size_t l = 0; l < out_depth_; ++l) {
      auto o = out.plane(n, l);
      std::fill(o.begin(), o.end(), bias_[l]);
      tally.bias_adds += s.plane();
      for (std::size_t i = 0; i < in_depth_; ++i) {
        const T* plane = padded.data() + i * ph * pw;
        for (std::size_t ky = 0; ky < kh_; ++ky) {
          for (std::size_t kx = 0; kx < kw_; ++kx) {
            const T w = weights_[((l * in_depth_ + i) * kh_ + ky) * kw_ + kx];
            for (std::size_t y = 0; y < s.h; ++y) {
              const T* src = plane + (y + ky) * pw + kx;
              T* dst = o.data() + y * s.w;
              for (std::size_t x = 0; x < s.w; ++x) dst[x] += w * src[x];
            }
            tally.mults += s.plane();
            tally.adds += s.plane();
          }
        }
      }
    }
  });
  for (const auto& t : tallies) counters_ += t;
  return out;
}

template <typename T>
void ConvLayer<T>::accumulate(const BasicTensor<T>& input,
                              const BasicTensor<T>& err_out,
                              std::span<T> wgrad, std::span<T> bgrad) const {
  const Shape& s = input.shape();
  const std::size_t ry = kh_ / 2, rx = kw_ / 2;
  const std::size_t ph = s.h + 2 * ry, pw = s.w + 2 * rx;
  const std::size_t chunks = chunk_count(s.n);
  if (chunks == 0) return;

  std::vector<std::vector<T>> wpart(chunks), bpart(chunks);
  parallel_for(chunks, threads_, [&](std::size_t chunk) {
    auto& wg = wpart[chunk];
    auto& bg = bpart[chunk];
    wg.assign(wgrad.size(), T(0));
    bg.assign(bgrad.size(), T(0));
    std::vector<T> padded;
    const std::size_t n_end = std::min(s.n, (chunk + 1) * kReductionChunk);
    for (std::size_t n = chunk * kReductionChunk; n < n_end; ++n) {
      pad_sample(input, n, ry, rx, padded);
      for (std::size_t l = 0; l < out_depth_; ++l) {
        auto e = err_out.plane(n, l);
        T total = T(0);
        for (T v : e) total += v;
        bg[l] += total;
        for (std::size_t i = 0; i < in_depth_; ++i) {
          const T* plane = padded.data() + i * ph * pw;
          for (std::size_t ky = 0; ky < kh_; ++ky) {
            for (std::size_t kx = 0; kx < kw_; ++kx) {
              T acc = T(0);
              for (std::size_t y = 0; y < s.h; ++y) {
                const T* src = plane + (y + ky) * pw + kx;
                const T* er = e.data() + y * s.w;
#pragma omp simd reduction(+ : acc)
                for (std::size_t x = 0; x < s.w; ++x) acc += er[x] * src[x];
              }
              wg[((l * in_depth_ + i) * kh_ + ky) * kw_ + kx] += acc;
            }
          }
        }
      }
    }
  });
  for (std::size_t chunk = 0; chunk < chunks; ++chunk) {
    for (std::size_t q = 0; q < wgrad.size(); ++q) wgrad[q] += wpart[chunk][q];
    for (std::size_t q = 0; q < bgrad.size(); ++q) bgrad[q] += bpart[chunk][q];
  }
}

template <typename T>
BasicTensor<T> ConvLayer<T>::backward(const BasicTensor<T>& input,
                                      const BasicTensor<T>& err_out,
                                      ConvGradients<T>* grads,
                                      bool want_input_grad) const {
  const Shape& s = input.shape();
  check_input(s);
  const Shape want{s.n, out_depth_, s.h, s.w};
  if (err_out.shape() != want) {
    throw ConfigError("conv error tensor has shape " +
                      to_string(err_out.shape()) + ", expected " +
                      to_string(want));
  }
  if (grads) {
    grads->weights.resize(weights_.size(), T(0));
    grads->bias.resize(bias_.size(), T(0));
    accumulate(input, err_out, grads->weights, grads->bias);
  }
  if (!want_input_grad) return {};

  BasicTensor<T> err_in(s);
  const std::size_t ry = kh_ / 2, rx = kw_ / 2;
  const std::size_t ph = s.h + 2 * ry, pw = s.w + 2 * rx;
  parallel_for(s.n, threads_, [&](std::size_t n) {
    std::vector<T> padded(s.c * ph * pw, T(0));
    for (std::size_t l = 0; l < out_depth_; ++l) {
      auto e = err_out.plane(n, l);
      for (std::size_t i = 0; i < in_depth_; ++i) {
        T* plane = padded.data() + i * ph * pw;
        for (std::size_t ky = 0; ky < kh_; ++ky) {
          for (std::size_t kx = 0; kx < kw_; ++kx) {
            const T w = weights_[((l * in_depth_ + i) * kh_ + ky) * kw_ + kx];
            for (std::size_t y = 0; y < s.h; ++y) {
              T* dst = plane + (y + ky) * pw + kx;
              const T* er = e.data() + y * s.w;
              for (std::size_t x = 0; x < s.w; ++x) dst[x] += w * er[x];
            }
          }
        }
      }
    }
    for (std::size_t i = 0; i < s.c; ++i) {
      auto dst = err_in.plane(n, i);
      for (std::size_t y = 0; y < s.h; ++y) {
        std::copy_n(padded.data() + (i * ph + y + ry) * pw + rx, s.w,
                    dst.data() + y * s.w);
      }
    }
  });
  return err_in;
}

template <typename T>
BasicTensor<T> ConvLayer<T>::propagate(const BasicTensor<T>& input,
                                       bool keep_state) {
  BasicTensor<T> out = forward(input);
  if (keep_state) {
    kept_input_ = input;
    has_state_ = true;
  }
  return out;
}

template <typename T>
BasicTensor<T> ConvLayer<T>::backpropagate(const BasicTensor<T>& grad_output,
                                           bool want_input_grad) {
  if (!has_state_) {
    throw ConfigError("conv backpropagate called without a kept forward pass");
  }
  ConvGradients<T> grads{std::move(weights_grad_), std::move(bias_grad_)};
  BasicTensor<T> err_in =
      backward(kept_input_, grad_output, &grads, want_input_grad);
  weights_grad_ = std::move(grads.weights);
  bias_grad_ = std::move(grads.bias);
  return err_in;
}

template <typename T>
std::vector<ParamBlock<T>> ConvLayer<T>::parameters() {
  return {
      {"conv.weights", weights_, weights_grad_, DecayGroup::kConv},
      {"conv.bias", bias_, bias_grad_, DecayGroup::kNone},
  };
}

template <typename T>
std::unique_ptr<Layer<T>> ConvLayer<T>::clone() const {
  auto copy = std::make_unique<ConvLayer<T>>(*this);
  copy->kept_input_ = {};
  copy->has_state_ = false;
  return copy;
}

template class ConvLayer<float>;
template class ConvLayer<double>;

}  // namespace ferns
