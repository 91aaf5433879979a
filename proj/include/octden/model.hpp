#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "octden/error.hpp"
#include "octden/image.hpp"
#include "octden/nn.hpp"
#include "octden/tensor.hpp"

namespace octden {

enum class BlockKind : std::uint32_t { Cbn = 1, Branch = 2, Res = 3, OutputConv = 4 };

inline const char* block_name(BlockKind k) {
  switch (k) {
    case BlockKind::Cbn: return "cbn";
    case BlockKind::Branch: return "branch";
    case BlockKind::Res: return "res";
    case BlockKind::OutputConv: return "out";
  }
  return "?";
}

/// Longest conv path through the body (the output head is not counted).
inline constexpr std::size_t kNetworkDepth = 12;

/// Architecture descriptor. The body is CBN, CBN, Branch, Res x3, CBN, CBN;
/// a plain convolution head maps the hidden width back to image channels so
/// the predicted noise can take either sign.
struct NetworkSpec {
  std::vector<BlockKind> blocks{BlockKind::Cbn, BlockKind::Cbn,        BlockKind::Branch,
                                BlockKind::Res, BlockKind::Res,        BlockKind::Res,
                                BlockKind::Cbn, BlockKind::Cbn,        BlockKind::OutputConv};
  std::size_t width = 64;
  std::size_t kernel = 3;
  std::size_t in_channels = 1;
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;

  bool operator==(const NetworkSpec&) const = default;

  std::size_t longest_conv_path() const {
    std::size_t depth = 0;
    for (BlockKind k : blocks) {
      switch (k) {
        case BlockKind::Cbn: depth += 1; break;
        case BlockKind::Branch: depth += 2; break;  // max(CBN, conv->conv)
        case BlockKind::Res: depth += 2; break;
        case BlockKind::OutputConv: break;
      }
    }
    return depth;
  }

  std::size_t conv_count() const {
    std::size_t n = 0;
    for (BlockKind k : blocks) {
      switch (k) {
        case BlockKind::Cbn: n += 1; break;
        case BlockKind::Branch: n += 3; break;
        case BlockKind::Res: n += 2; break;
        case BlockKind::OutputConv: n += 1; break;
      }
    }
    return n;
  }

  void validate() const {
    if (width == 0 || in_channels == 0) throw InputError("network width and channels must be >= 1");
    if (kernel % 2 == 0) throw InputError("network kernel size must be odd");
    if (!(bn_eps > 0.0) || bn_momentum < 0.0 || bn_momentum > 1.0) {
      throw InputError("batch-norm eps must be > 0 and momentum in [0, 1]");
    }
    if (blocks.size() < 2 || blocks.front() != BlockKind::Cbn ||
        blocks.back() != BlockKind::OutputConv) {
      throw InputError("network must start with a CBN block and end with the output head");
    }
    for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
      if (blocks[i] == BlockKind::OutputConv) throw InputError("output head must be last");
    }
    if (longest_conv_path() != kNetworkDepth) {
      throw InputError("network depth is " + std::to_string(longest_conv_path()) + ", expected " +
                       std::to_string(kNetworkDepth));
    }
  }
};

template <typename T>
struct CbnBlock {
  ConvParams<T> conv;
  BNParams<T> bn;
  bool operator==(const CbnBlock&) const = default;
};

/// cbn(x) + conv_b(conv_a(x)); the plain pair has no normalization or activation.
template <typename T>
struct BranchBlock {
  CbnBlock<T> cbn;
  ConvParams<T> conv_a;
  ConvParams<T> conv_b;
  bool operator==(const BranchBlock&) const = default;
};

/// relu(x + bn2(conv2(relu(bn1(conv1(x)))))).
template <typename T>
struct ResBlock {
  ConvParams<T> conv1;
  BNParams<T> bn1;
  ConvParams<T> conv2;
  BNParams<T> bn2;
  bool operator==(const ResBlock&) const = default;
};

template <typename T>
struct OutputBlock {
  ConvParams<T> conv;
  bool operator==(const OutputBlock&) const = default;
};

template <typename T>
using Block = std::variant<CbnBlock<T>, BranchBlock<T>, ResBlock<T>, OutputBlock<T>>;

template <typename T>
struct Network {
  NetworkSpec spec;
  std::vector<Block<T>> blocks;
  bool operator==(const Network&) const = default;
};

/// Parameter tensors all zero, BN at identity statistics (gamma 1, running
/// variance 1). Also the layout used for gradient accumulators.
template <typename T>
Network<T> make_zero_network(const NetworkSpec& spec) {
  spec.validate();
  Network<T> net{spec, {}};
  const std::size_t w = spec.width, k = spec.kernel;
  auto bn = [&] { return BNParams<T>(w, spec.bn_eps, spec.bn_momentum); };
  std::size_t channels = spec.in_channels;
  for (BlockKind kind : spec.blocks) {
    switch (kind) {
      case BlockKind::Cbn:
        net.blocks.emplace_back(CbnBlock<T>{ConvParams<T>(w, channels, k), bn()});
        channels = w;
        break;
      case BlockKind::Branch:
        net.blocks.emplace_back(BranchBlock<T>{CbnBlock<T>{ConvParams<T>(w, channels, k), bn()},
                                               ConvParams<T>(w, channels, k),
                                               ConvParams<T>(w, w, k)});
        channels = w;
        break;
      case BlockKind::Res:
        if (channels != w) throw InputError("residual block needs width-sized input");
        net.blocks.emplace_back(
            ResBlock<T>{ConvParams<T>(w, w, k), bn(), ConvParams<T>(w, w, k), bn()});
        break;
      case BlockKind::OutputConv:
        net.blocks.emplace_back(OutputBlock<T>{ConvParams<T>(spec.in_channels, channels, k)});
        channels = spec.in_channels;
        break;
    }
  }
  return net;
}

namespace detail {
template <typename Net, typename F>
void visit_blocks(Net& net, F&& f) {
  std::size_t conv_i = 0, bn_i = 0;
  auto conv = [&](auto& c) { f.conv(c, "conv" + std::to_string(conv_i++)); };
  auto norm = [&](auto& b) { f.bn(b, "bn" + std::to_string(bn_i++)); };
  for (auto& blk : net.blocks) {
    std::visit(
        [&](auto& b) {
          if constexpr (requires { b.cbn; }) {
            conv(b.cbn.conv);
            norm(b.cbn.bn);
            conv(b.conv_a);
            conv(b.conv_b);
          } else if constexpr (requires { b.conv1; }) {
            conv(b.conv1);
            norm(b.bn1);
            conv(b.conv2);
            norm(b.bn2);
          } else if constexpr (requires { b.bn; }) {
            conv(b.conv);
            norm(b.bn);
          } else {
            conv(b.conv);
          }
        },
        blk);
  }
}
}  // namespace detail

template <typename T>
struct ParamRef {
  std::string name;
  std::span<T> values;
};

/// Trainable parameters in block order: conv weights, conv bias, BN gamma, BN beta.
template <typename T>
std::vector<ParamRef<T>> parameters(Network<T>& net) {
  std::vector<ParamRef<T>> out;
  struct V {
    std::vector<ParamRef<T>>& out;
    void conv(ConvParams<T>& c, const std::string& n) {
      out.push_back({n + ".weight", c.weights.data()});
      out.push_back({n + ".bias", c.bias});
    }
    void bn(BNParams<T>& b, const std::string& n) {
      out.push_back({n + ".gamma", b.gamma});
      out.push_back({n + ".beta", b.beta});
    }
  } v{out};
  detail::visit_blocks(net, v);
  return out;
}

/// Every persisted array in block order: trainable parameters plus BN
/// running statistics (after gamma and beta).
template <typename T>
std::vector<ParamRef<T>> state_arrays(Network<T>& net) {
  std::vector<ParamRef<T>> out;
  struct V {
    std::vector<ParamRef<T>>& out;
    void conv(ConvParams<T>& c, const std::string& n) {
      out.push_back({n + ".weight", c.weights.data()});
      out.push_back({n + ".bias", c.bias});
    }
    void bn(BNParams<T>& b, const std::string& n) {
      out.push_back({n + ".gamma", b.gamma});
      out.push_back({n + ".beta", b.beta});
      out.push_back({n + ".running_mean", b.running_mean});
      out.push_back({n + ".running_var", b.running_var});
    }
  } v{out};
  detail::visit_blocks(net, v);
  return out;
}

/// He-initialized network, deterministic in `seed`.
template <typename T>
Network<T> make_network(const NetworkSpec& spec, std::uint64_t seed) {
  Network<T> net = make_zero_network<T>(spec);
  std::mt19937_64 rng(seed);
  struct V {
    std::mt19937_64& rng;
    void conv(ConvParams<T>& c, const std::string&) { he_init(c, rng); }
    void bn(BNParams<T>&, const std::string&) {}
  } v{rng};
  detail::visit_blocks(net, v);
  return net;
}

template <typename U, typename T>
Network<U> network_cast(const Network<T>& src) {
  Network<U> dst = make_zero_network<U>(src.spec);
  auto& s = const_cast<Network<T>&>(src);
  auto from = state_arrays(s);
  auto to = state_arrays(dst);
  for (std::size_t i = 0; i < from.size(); ++i)
    std::transform(from[i].values.begin(), from[i].values.end(), to[i].values.begin(),
                   [](T v) { return static_cast<U>(v); });
  return dst;
}

template <typename T>
std::size_t parameter_count(const Network<T>& net) {
  std::size_t n = 0;
  for (auto& p : parameters(const_cast<Network<T>&>(net))) n += p.values.size();
  return n;
}

// ---------------------------------------------------------------------------
// Blocks: forward and backward

/// Backward-pass state. Block outputs are kept by the caller (NetworkTape)
/// and passed back in, so caches hold only block internals.
template <typename T>
struct CbnCache {
  BNCache<T> bn;
};
template <typename T>
struct BranchCache {
  BNCache<T> bn;
  Tensor<T> cbn_out;
  Tensor<T> mid;  // conv_a(x)
};
template <typename T>
struct ResCache {
  BNCache<T> bn1;
  Tensor<T> act1;
  BNCache<T> bn2;
};

template <typename T>
Tensor<T> cbn_forward(const Tensor<T>& x, CbnBlock<T>& blk, Mode mode,
                      CbnCache<T>* cache = nullptr) {
  Tensor<T> y = batchnorm2d(conv2d(x, blk.conv), blk.bn, mode, cache ? &cache->bn : nullptr);
  relu_inplace(y);
  return y;
}

template <typename T>
Tensor<T> cbn_infer(const Tensor<T>& x, const CbnBlock<T>& blk) {
  return cbn_forward(x, const_cast<CbnBlock<T>&>(blk), Mode::Infer);
}

/// Returns dL/dx; parameter gradients are accumulated into `grads`.
template <typename T>
Tensor<T> cbn_backward(const Tensor<T>& x, const Tensor<T>& out, const CbnBlock<T>& blk,
                       const CbnCache<T>& cache, const Tensor<T>& gout, CbnBlock<T>& grads,
                       bool need_input_grad = true) {
  auto gbn = batchnorm2d_backward(cache.bn, blk.bn, relu_backward(out, gout));
  grads.bn.gamma = gbn.gamma;
  grads.bn.beta = gbn.beta;
  auto gc = conv2d_backward(x, blk.conv, gbn.input, need_input_grad);
  grads.conv.weights = std::move(gc.weights);
  grads.conv.bias = std::move(gc.bias);
  return std::move(gc.input);
}

template <typename T>
Tensor<T> branch_forward(const Tensor<T>& x, BranchBlock<T>& blk, Mode mode,
                         BranchCache<T>* cache = nullptr) {
  Tensor<T> a = batchnorm2d(conv2d(x, blk.cbn.conv), blk.cbn.bn, mode,
                            cache ? &cache->bn : nullptr);
  relu_inplace(a);
  Tensor<T> mid = conv2d(x, blk.conv_a);
  Tensor<T> out = conv2d(mid, blk.conv_b);
  add_inplace(out, a);
  if (cache) {
    cache->cbn_out = std::move(a);
    cache->mid = std::move(mid);
  }
  return out;
}

template <typename T>
Tensor<T> branch_backward(const Tensor<T>& x, const BranchBlock<T>& blk,
                          const BranchCache<T>& cache, const Tensor<T>& gout,
                          BranchBlock<T>& grads) {
  CbnCache<T> cc{cache.bn};
  Tensor<T> gx = cbn_backward(x, cache.cbn_out, blk.cbn, cc, gout, grads.cbn);
  auto gb = conv2d_backward(cache.mid, blk.conv_b, gout);
  grads.conv_b.weights = std::move(gb.weights);
  grads.conv_b.bias = std::move(gb.bias);
  auto ga = conv2d_backward(x, blk.conv_a, gb.input);
  grads.conv_a.weights = std::move(ga.weights);
  grads.conv_a.bias = std::move(ga.bias);
  add_inplace(gx, ga.input);
  return gx;
}

template <typename T>
Tensor<T> res_forward(const Tensor<T>& x, ResBlock<T>& blk, Mode mode,
                      ResCache<T>* cache = nullptr) {
  Tensor<T> h = batchnorm2d(conv2d(x, blk.conv1), blk.bn1, mode, cache ? &cache->bn1 : nullptr);
  relu_inplace(h);
  Tensor<T> f = batchnorm2d(conv2d(h, blk.conv2), blk.bn2, mode, cache ? &cache->bn2 : nullptr);
  add_inplace(f, x);
  relu_inplace(f);
  if (cache) cache->act1 = std::move(h);
  return f;
}

template <typename T>
Tensor<T> res_backward(const Tensor<T>& x, const Tensor<T>& out, const ResBlock<T>& blk,
                       const ResCache<T>& cache, const Tensor<T>& gout, ResBlock<T>& grads) {
  Tensor<T> gsum = relu_backward(out, gout);
  auto g2 = batchnorm2d_backward(cache.bn2, blk.bn2, gsum);
  grads.bn2.gamma = g2.gamma;
  grads.bn2.beta = g2.beta;
  auto gc2 = conv2d_backward(cache.act1, blk.conv2, g2.input);
  grads.conv2.weights = std::move(gc2.weights);
  grads.conv2.bias = std::move(gc2.bias);
  auto g1 = batchnorm2d_backward(cache.bn1, blk.bn1, relu_backward(cache.act1, gc2.input));
  grads.bn1.gamma = g1.gamma;
  grads.bn1.beta = g1.beta;
  auto gc1 = conv2d_backward(x, blk.conv1, g1.input);
  grads.conv1.weights = std::move(gc1.weights);
  grads.conv1.bias = std::move(gc1.bias);
  add_inplace(gsum, gc1.input);
  return gsum;
}

// ---------------------------------------------------------------------------
// Whole network

template <typename T>
using BlockCache = std::variant<CbnCache<T>, BranchCache<T>, ResCache<T>, std::monostate>;

/// Activations and caches recorded by a forward pass for backward.
/// activations[i] is the input of block i; the last entry is the output.
template <typename T>
struct NetworkTape {
  std::vector<Tensor<T>> activations;
  std::vector<BlockCache<T>> caches;
};

namespace detail {
inline void check_network_input(const Shape& s, std::size_t channels) {
  if (s.c != channels) {
    throw ShapeError("network expects " + std::to_string(channels) + " input channel(s), got " +
                     std::to_string(s.c));
  }
  if (s.h < 3 || s.w < 3) {
    throw InputError("network input must be at least 3x3, got " + std::to_string(s.h) + "x" +
                     std::to_string(s.w));
  }
}
}  // namespace detail

/// Predicted noise for a (n, in_channels, h, w) batch; output dims equal
/// input dims. Train mode updates BN running statistics and, with a tape,
/// records what network_backward needs.
template <typename T>
Tensor<T> network_forward(const Tensor<T>& noisy, Network<T>& net, Mode mode,
                          NetworkTape<T>* tape = nullptr) {
  detail::check_network_input(noisy.shape(), net.spec.in_channels);
  if (tape) {
    tape->activations.clear();
    tape->caches.clear();
    tape->activations.reserve(net.blocks.size() + 1);
    tape->activations.push_back(noisy);
  }
  Tensor<T> owned;
  const Tensor<T>* cur = tape ? &tape->activations.back() : &noisy;
  for (auto& blk : net.blocks) {
    const Tensor<T>& x = *cur;
    Tensor<T> y = std::visit(
        [&](auto& b) -> Tensor<T> {
          using B = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<B, CbnBlock<T>>) {
            if (!tape) return cbn_forward(x, b, mode);
            CbnCache<T> c;
            auto out = cbn_forward(x, b, mode, &c);
            tape->caches.emplace_back(std::move(c));
            return out;
          } else if constexpr (std::is_same_v<B, BranchBlock<T>>) {
            if (!tape) return branch_forward(x, b, mode);
            BranchCache<T> c;
            auto out = branch_forward(x, b, mode, &c);
            tape->caches.emplace_back(std::move(c));
            return out;
          } else if constexpr (std::is_same_v<B, ResBlock<T>>) {
            if (!tape) return res_forward(x, b, mode);
            ResCache<T> c;
            auto out = res_forward(x, b, mode, &c);
            tape->caches.emplace_back(std::move(c));
            return out;
          } else {
            if (tape) tape->caches.emplace_back(std::monostate{});
            return conv2d(x, b.conv);
          }
        },
        blk);
    if (tape) {
      tape->activations.push_back(std::move(y));
      cur = &tape->activations.back();
    } else {
      owned = std::move(y);
      cur = &owned;
    }
  }
  return *cur;
}

/// Infer-mode prediction; never mutates the network.
template <typename T>
Tensor<T> predict_noise(const Tensor<T>& noisy, const Network<T>& net) {
  return network_forward(noisy, const_cast<Network<T>&>(net), Mode::Infer);
}

template <typename T>
struct NetworkGrads {
  Network<T> params;  // same layout as the network; running stats unused
  Tensor<T> input;
};

/// Gradients of a scalar loss given dL/d(predicted noise) and the tape of a
/// Train-mode forward pass.
template <typename T>
NetworkGrads<T> network_backward(const NetworkTape<T>& tape, const Network<T>& net,
                                 const Tensor<T>& grad_out, bool need_input_grad = false) {
  if (tape.caches.size() != net.blocks.size()) {
    throw InputError("network_backward: tape does not match network");
  }
  NetworkGrads<T> g{make_zero_network<T>(net.spec), {}};
  Tensor<T> grad = grad_out;
  for (std::size_t i = net.blocks.size(); i-- > 0;) {
    const Tensor<T>& x = tape.activations[i];
    const Tensor<T>& out = tape.activations[i + 1];
    const bool need = i > 0 || need_input_grad;
    grad = std::visit(
        [&](const auto& b) -> Tensor<T> {
          using B = std::decay_t<decltype(b)>;
          auto& gb = std::get<B>(g.params.blocks[i]);
          if constexpr (std::is_same_v<B, CbnBlock<T>>) {
            return cbn_backward(x, out, b, std::get<CbnCache<T>>(tape.caches[i]), grad, gb, need);
          } else if constexpr (std::is_same_v<B, BranchBlock<T>>) {
            return branch_backward(x, b, std::get<BranchCache<T>>(tape.caches[i]), grad, gb);
          } else if constexpr (std::is_same_v<B, ResBlock<T>>) {
            return res_backward(x, out, b, std::get<ResCache<T>>(tape.caches[i]), grad, gb);
          } else {
            auto gc = conv2d_backward(x, b.conv, grad, need);
            gb.conv.weights = std::move(gc.weights);
            gb.conv.bias = std::move(gc.bias);
            return std::move(gc.input);
          }
        },
        net.blocks[i]);
  }
  if (need_input_grad) g.input = std::move(grad);
  return g;
}

/// Noisy minus predicted noise, clamped to [0, 1].
template <typename T>
Image denoise(const Image& noisy, const Network<T>& net) {
  const Tensor<T> x = to_tensor<T>(noisy);
  const Tensor<T> noise = predict_noise(x, net);
  Image out(noisy.height(), noisy.width());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(noisy[i] - static_cast<double>(noise[i]), 0.0, 1.0);
  }
  return out;
}

}  // namespace octden
