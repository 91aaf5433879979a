#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <random>
#include <string>
#include <vector>

#include "octden/error.hpp"
#include "octden/parallel.hpp"
#include "octden/tensor.hpp"

namespace octden {

enum class Mode { Train, Infer };

/// Weights are (out_ch, in_ch, s, s); s odd, stride 1, zero "same" padding.
template <typename T>
struct ConvParams {
  Tensor<T> weights;
  std::vector<T> bias;

  ConvParams() = default;
  ConvParams(std::size_t out_ch, std::size_t in_ch, std::size_t kernel)
      : weights(Shape{out_ch, in_ch, kernel, kernel}), bias(out_ch, T{0}) {
    if (kernel % 2 == 0) throw ShapeError("conv kernel size must be odd");
  }

  std::size_t out_channels() const { return weights.shape().n; }
  std::size_t in_channels() const { return weights.shape().c; }
  std::size_t kernel() const { return weights.shape().h; }

  bool operator==(const ConvParams&) const = default;
};

/// Zero-mean Gaussian with variance 2 / (in_ch * s^2); biases zero.
template <typename T, typename Rng>
void he_init(ConvParams<T>& p, Rng& rng) {
  const double fan_in = static_cast<double>(p.in_channels() * p.kernel() * p.kernel());
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (auto& w : p.weights.data()) w = static_cast<T>(dist(rng));
  std::fill(p.bias.begin(), p.bias.end(), T{0});
}

template <typename T>
struct BNParams {
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  double eps = 1e-5;
  double momentum = 0.9;

  BNParams() = default;
  explicit BNParams(std::size_t channels, double eps_ = 1e-5, double momentum_ = 0.9)
      : gamma(channels, T{1}),
        beta(channels, T{0}),
        running_mean(channels, T{0}),
        running_var(channels, T{1}),
        eps(eps_),
        momentum(momentum_) {}

  std::size_t channels() const { return gamma.size(); }
  bool operator==(const BNParams&) const = default;
};

// ---------------------------------------------------------------------------
// Convolution

namespace detail {

inline void check_conv(const Shape& in, std::size_t in_ch) {
  if (in.c != in_ch) {
    throw ShapeError("conv2d: input has " + std::to_string(in.c) + " channels, kernel expects " +
                     std::to_string(in_ch));
  }
}

/// Output columns per GEMM so the working set stays cache resident.
inline constexpr std::size_t kConvChunkColumns = 1024;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

/// One batch item zero-padded by k/2 on every side. Every tap of the kernel
/// is then a constant offset into each padded plane, so a block of output
/// rows laid out with the padded row pitch is a sum of k*k GEMMs over shifted
/// views. The two extra columns per row are scratch and get discarded.
template <typename T>
struct PaddedItem {
  std::size_t pad, hp, wp, plane;
  std::vector<T> data;

  PaddedItem(std::span<const T> item, const Shape& s, std::size_t k)
      : pad(k / 2), hp(s.h + 2 * pad), wp(s.w + 2 * pad), plane(hp * wp) {
    // Slack past the last plane keeps the scratch columns of the last tap in bounds.
    data.assign(s.c * plane + 2 * pad + wp, T{0});
    for (std::size_t ch = 0; ch < s.c; ++ch)
      for (std::size_t y = 0; y < s.h; ++y) {
        const T* src = item.data() + ch * s.plane() + y * s.w;
        std::copy(src, src + s.w, data.data() + ch * plane + (y + pad) * wp + pad);
      }
  }

  /// (channels x cols) view for tap (dy, dx) starting at output row y0.
  ConstStridedMap<T> tap(std::size_t channels, std::size_t y0, std::size_t dy, std::size_t dx,
                         std::size_t cols) const {
    return ConstStridedMap<T>(data.data() + (y0 + dy) * wp + dx,
                              static_cast<Eigen::Index>(channels),
                              static_cast<Eigen::Index>(cols),
                              Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
  }
};

/// Per-tap (out_ch x in_ch) slices of the weight tensor.
template <typename T>
std::vector<RowMat<T>> tap_weights(const ConvParams<T>& p) {
  const std::size_t k = p.kernel();
  std::vector<RowMat<T>> taps(k * k);
  for (std::size_t t = 0; t < k * k; ++t) {
    taps[t].resize(static_cast<Eigen::Index>(p.out_channels()),
                   static_cast<Eigen::Index>(p.in_channels()));
    for (std::size_t o = 0; o < p.out_channels(); ++o)
      for (std::size_t c = 0; c < p.in_channels(); ++c)
        taps[t](static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(c)) =
            p.weights(o, c, t / k, t % k);
  }
  return taps;
}

inline std::size_t chunk_rows(std::size_t padded_width) {
  return std::max<std::size_t>(1, kConvChunkColumns / padded_width);
}

}  // namespace detail

/// Reference convolution by direct loops over the zero-padded input.
template <typename T>
Tensor<T> conv2d_direct(const Tensor<T>& input, const ConvParams<T>& p) {
  detail::check_conv(input.shape(), p.in_channels());
  const Shape s = input.shape();
  const std::size_t k = p.kernel();
  const Tensor<T> padded = pad_zero(input, k / 2);
  Tensor<T> out(Shape{s.n, p.out_channels(), s.h, s.w});
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t o = 0; o < p.out_channels(); ++o)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) {
          T acc = p.bias[o];
          for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t dy = 0; dy < k; ++dy)
              for (std::size_t dx = 0; dx < k; ++dx)
                acc += p.weights(o, c, dy, dx) * padded(b, c, y + dy, x + dx);
          out(b, o, y, x) = acc;
        }
  return out;
}

/// Same-size convolution as k*k GEMMs over shifted views of the padded
/// input, a block of output rows at a time. Batch items run through
/// parallel_for.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvParams<T>& p) {
  detail::check_conv(input.shape(), p.in_channels());
  const Shape s = input.shape();
  const std::size_t k = p.kernel();
  const std::size_t kout = p.out_channels();
  const auto taps = detail::tap_weights(p);
  Tensor<T> out(Shape{s.n, kout, s.h, s.w});
  parallel_for(s.n, [&](std::size_t b) {
    const detail::PaddedItem<T> xp(input.item(b), s, k);
    const std::size_t chunk = detail::chunk_rows(xp.wp);
    detail::RowMat<T> acc;
    auto out_item = out.item(b);
    for (std::size_t y0 = 0; y0 < s.h; y0 += chunk) {
      const std::size_t rows = std::min(chunk, s.h - y0);
      const std::size_t cols = rows * xp.wp;
      acc.setZero(static_cast<Eigen::Index>(kout), static_cast<Eigen::Index>(cols));
      for (std::size_t t = 0; t < k * k; ++t)
        acc.noalias() += taps[t] * xp.tap(s.c, y0, t / k, t % k, cols);
      for (std::size_t o = 0; o < kout; ++o) {
        const T bias = p.bias[o];
        for (std::size_t r = 0; r < rows; ++r) {
          const T* src = acc.data() + o * cols + r * xp.wp;
          T* dst = out_item.data() + o * s.plane() + (y0 + r) * s.w;
          for (std::size_t x = 0; x < s.w; ++x) dst[x] = src[x] + bias;
        }
      }
    }
  });
  return out;
}

/// Kernel of the adjoint convolution: in/out channels swapped and taps
/// rotated by 180 degrees, zero bias. conv2d with it maps dL/d(output) to
/// dL/d(input).
template <typename T>
ConvParams<T> adjoint_kernel(const ConvParams<T>& p) {
  const std::size_t k = p.kernel();
  ConvParams<T> t(p.in_channels(), p.out_channels(), k);
  for (std::size_t o = 0; o < p.out_channels(); ++o)
    for (std::size_t c = 0; c < p.in_channels(); ++c)
      for (std::size_t dy = 0; dy < k; ++dy)
        for (std::size_t dx = 0; dx < k; ++dx)
          t.weights(c, o, k - 1 - dy, k - 1 - dx) = p.weights(o, c, dy, dx);
  return t;
}

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weights;
  std::vector<T> bias;
};

/// Gradients of conv2d given the forward input and dL/d(output). The input
/// gradient is the adjoint convolution of dL/d(output); per-item weight
/// gradients are summed in batch order.
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvParams<T>& p,
                             const Tensor<T>& grad_out, bool need_input_grad = true) {
  detail::check_conv(input.shape(), p.in_channels());
  const Shape s = input.shape();
  const std::size_t k = p.kernel();
  const std::size_t kout = p.out_channels();
  detail::require_same_shape(grad_out.shape(), Shape{s.n, kout, s.h, s.w}, "conv2d_backward");

  ConvGrads<T> g;
  if (need_input_grad) g.input = conv2d(grad_out, adjoint_kernel(p));
  g.weights = Tensor<T>(p.weights.shape());
  g.bias.assign(kout, T{0});

  // Per item, per tap: dW_t += G * X_t^T, with G laid out at the padded row
  // pitch and zero in the scratch columns.
  std::vector<std::vector<detail::RowMat<T>>> item_dw(s.n);
  parallel_for(s.n, [&](std::size_t b) {
    const detail::PaddedItem<T> xp(input.item(b), s, k);
    const std::size_t chunk = detail::chunk_rows(xp.wp);
    auto& dw = item_dw[b];
    dw.assign(k * k, detail::RowMat<T>::Zero(static_cast<Eigen::Index>(kout),
                                             static_cast<Eigen::Index>(s.c)));
    auto gitem = grad_out.item(b);
    detail::RowMat<T> gm;
    for (std::size_t y0 = 0; y0 < s.h; y0 += chunk) {
      const std::size_t rows = std::min(chunk, s.h - y0);
      const std::size_t cols = rows * xp.wp;
      gm.setZero(static_cast<Eigen::Index>(kout), static_cast<Eigen::Index>(cols));
      for (std::size_t o = 0; o < kout; ++o)
        for (std::size_t r = 0; r < rows; ++r) {
          const T* src = gitem.data() + o * s.plane() + (y0 + r) * s.w;
          std::copy(src, src + s.w, gm.data() + o * cols + r * xp.wp);
        }
      for (std::size_t t = 0; t < k * k; ++t)
        dw[t].noalias() += gm * xp.tap(s.c, y0, t / k, t % k, cols).transpose();
    }
  });
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t t = 0; t < k * k; ++t)
      for (std::size_t o = 0; o < kout; ++o)
        for (std::size_t c = 0; c < s.c; ++c)
          g.weights(o, c, t / k, t % k) +=
              item_dw[b][t](static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(c));
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t o = 0; o < kout; ++o) g.bias[o] += detail::sum(grad_out.plane(b, o));
  return g;
}

// ---------------------------------------------------------------------------
// Batch normalization

/// What the backward pass needs from a Train-mode forward.
template <typename T>
struct BNCache {
  Tensor<T> xhat;
  std::vector<T> inv_std;
};

namespace detail {
template <typename T>
void check_bn(const Shape& s, const BNParams<T>& p) {
  if (s.c != p.channels()) {
    throw ShapeError("batchnorm2d: input has " + std::to_string(s.c) + " channels, params have " +
                     std::to_string(p.channels()));
  }
}
}  // namespace detail

/// Train mode normalizes with batch statistics (population variance) and
/// blends them into the running statistics; Infer mode uses the running
/// statistics and leaves params untouched. `cache` may be null.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& input, BNParams<T>& p, Mode mode,
                      BNCache<T>* cache = nullptr) {
  const Shape s = input.shape();
  detail::check_bn(s, p);
  Tensor<T> out(s);
  if (mode == Mode::Infer) {
    for (std::size_t ch = 0; ch < s.c; ++ch) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(p.running_var[ch]) + p.eps);
      const T scale = static_cast<T>(static_cast<double>(p.gamma[ch]) * inv);
      const T shift = static_cast<T>(static_cast<double>(p.beta[ch]) -
                                     static_cast<double>(p.running_mean[ch]) * scale);
      for (std::size_t b = 0; b < s.n; ++b) {
        auto src = input.plane(b, ch);
        auto dst = out.plane(b, ch);
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * scale + shift;
      }
    }
    return out;
  }
  if (s.n * s.plane() < 2) {
    throw DegenerateError("batchnorm2d: Train mode needs at least two values per channel");
  }
  const ChannelStats st = channel_stats(input);
  BNCache<T> local;
  BNCache<T>& c = cache ? *cache : local;
  c.xhat = Tensor<T>(s);
  c.inv_std.assign(s.c, T{0});
  const double m = p.momentum;
  for (std::size_t ch = 0; ch < s.c; ++ch) {
    const double inv = 1.0 / std::sqrt(st.variance[ch] + p.eps);
    c.inv_std[ch] = static_cast<T>(inv);
    const T mean = static_cast<T>(st.mean[ch]);
    const T tinv = static_cast<T>(inv);
    const T g = p.gamma[ch];
    const T bt = p.beta[ch];
    for (std::size_t b = 0; b < s.n; ++b) {
      auto src = input.plane(b, ch);
      auto xh = c.xhat.plane(b, ch);
      auto dst = out.plane(b, ch);
      for (std::size_t i = 0; i < src.size(); ++i) {
        xh[i] = (src[i] - mean) * tinv;
        dst[i] = g * xh[i] + bt;
      }
    }
    p.running_mean[ch] =
        static_cast<T>(m * static_cast<double>(p.running_mean[ch]) + (1.0 - m) * st.mean[ch]);
    p.running_var[ch] =
        static_cast<T>(m * static_cast<double>(p.running_var[ch]) + (1.0 - m) * st.variance[ch]);
  }
  return out;
}

template <typename T>
struct BNGrads {
  Tensor<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

template <typename T>
BNGrads<T> batchnorm2d_backward(const BNCache<T>& cache, const BNParams<T>& p,
                                const Tensor<T>& grad_out) {
  const Shape s = grad_out.shape();
  detail::check_bn(s, p);
  detail::require_same_shape(s, cache.xhat.shape(), "batchnorm2d_backward");
  BNGrads<T> g{Tensor<T>(s), std::vector<T>(s.c), std::vector<T>(s.c)};
  const double count = static_cast<double>(s.n * s.plane());
  for (std::size_t ch = 0; ch < s.c; ++ch) {
    double dgamma = 0.0, dbeta = 0.0;
    for (std::size_t b = 0; b < s.n; ++b) {
      dbeta += detail::sum(grad_out.plane(b, ch));
      dgamma += detail::dot(grad_out.plane(b, ch), cache.xhat.plane(b, ch));
    }
    g.gamma[ch] = static_cast<T>(dgamma);
    g.beta[ch] = static_cast<T>(dbeta);
    const T scale = static_cast<T>(static_cast<double>(p.gamma[ch]) *
                                   static_cast<double>(cache.inv_std[ch]) / count);
    const T n = static_cast<T>(count);
    const T db = static_cast<T>(dbeta);
    const T dg = static_cast<T>(dgamma);
    for (std::size_t b = 0; b < s.n; ++b) {
      auto go = grad_out.plane(b, ch);
      auto xh = cache.xhat.plane(b, ch);
      auto gi = g.input.plane(b, ch);
      for (std::size_t i = 0; i < go.size(); ++i) gi[i] = scale * (n * go[i] - db - xh[i] * dg);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// ReLU

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T{0} ? input[i] : T{0};
  return out;
}

template <typename T>
void relu_inplace(Tensor<T>& t) {
  for (auto& v : t.data()) v = v > T{0} ? v : T{0};
}

/// Passes gradient where the reference is strictly positive. The reference
/// may be the ReLU input or its output; both have the same positive set.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& reference, const Tensor<T>& grad_out) {
  detail::require_same_shape(reference.shape(), grad_out.shape(), "relu_backward");
  Tensor<T> g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = reference[i] > T{0} ? grad_out[i] : T{0};
  return g;
}

}  // namespace octden
