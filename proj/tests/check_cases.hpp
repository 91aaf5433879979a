#pragma once

// Gradient-check scenarios shared by the unit tests and the acceptance
// runner. Everything runs in double on inputs no larger than 8x8.

#include <string>
#include <vector>

#include "oracles.hpp"

namespace cases {

using namespace octden;

inline std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

inline void randomize(ConvParams<double>& p, std::uint64_t seed, double scale = 1.0) {
  p.weights = oracle::random_tensor(p.weights.shape(), seed, -scale, scale);
  std::mt19937_64 rng(seed ^ 0x5555);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto& b : p.bias) b = u(rng);
}

inline void randomize(BNParams<double>& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> g(0.5, 1.5), b(-0.3, 0.3);
  for (auto& v : p.gamma) v = g(rng);
  for (auto& v : p.beta) v = b(rng);
}

inline void push(std::vector<GradVariable>& vars, const std::string& name, ConvParams<double>& p) {
  vars.push_back({name + ".weight", p.weights.data()});
  vars.push_back({name + ".bias", p.bias});
}

inline void push(std::vector<GradVariable>& vars, const std::string& name, BNParams<double>& p) {
  vars.push_back({name + ".gamma", p.gamma});
  vars.push_back({name + ".beta", p.beta});
}

inline void append(std::vector<std::vector<double>>& out, const ConvParams<double>& g) {
  out.push_back(vec(g.weights.data()));
  out.push_back(g.bias);
}

inline void append(std::vector<std::vector<double>>& out, const BNParams<double>& g) {
  out.push_back(g.gamma);
  out.push_back(g.beta);
}

inline GradCheckReport conv() {
  auto x = oracle::random_tensor(Shape{1, 2, 5, 5}, 101);
  ConvParams<double> p(3, 2, 3);
  randomize(p, 102);
  std::vector<GradVariable> vars{{"input", x.data()}};
  push(vars, "conv", p);
  return grad_check(vars, [&] { return conv2d(x, p); },
                    [&](const Tensor<double>& g) {
                      const auto cg = conv2d_backward(x, p, g);
                      return std::vector<std::vector<double>>{vec(cg.input.data()), vec(cg.weights.data()), cg.bias};
                    });
}

inline GradCheckReport batchnorm() {
  auto x = oracle::random_tensor(Shape{2, 3, 4, 4}, 111);
  BNParams<double> p(3);
  randomize(p, 112);
  std::vector<GradVariable> vars{{"input", x.data()}};
  push(vars, "bn", p);
  return grad_check(vars,
                    [&] {
                      BNParams<double> q = p;
                      return batchnorm2d(x, q, Mode::Train);
                    },
                    [&](const Tensor<double>& g) {
                      BNParams<double> q = p;
                      BNCache<double> c;
                      batchnorm2d(x, q, Mode::Train, &c);
                      const auto bg = batchnorm2d_backward(c, p, g);
                      return std::vector<std::vector<double>>{vec(bg.input.data()), bg.gamma, bg.beta};
                    });
}

inline GradCheckReport relu_op() {
  auto x = oracle::random_tensor(Shape{1, 2, 4, 4}, 121);
  for (auto& v : x.data()) v += v >= 0 ? 0.1 : -0.1;  // stay off the kink
  return grad_check({{"input", x.data()}}, [&] { return relu(x); },
                    [&](const Tensor<double>& g) {
                      return std::vector<std::vector<double>>{vec(relu_backward(x, g).data())};
                    });
}

inline CbnBlock<double> random_cbn(std::size_t out, std::size_t in, std::uint64_t seed) {
  CbnBlock<double> b{ConvParams<double>(out, in, 3), BNParams<double>(out)};
  randomize(b.conv, seed);
  randomize(b.bn, seed + 1);
  return b;
}

inline GradCheckReport cbn() {
  auto x = oracle::random_tensor(Shape{2, 2, 6, 6}, 131);
  auto blk = random_cbn(3, 2, 132);
  std::vector<GradVariable> vars{{"input", x.data()}};
  push(vars, "conv", blk.conv);
  push(vars, "bn", blk.bn);
  return grad_check(vars,
                    [&] {
                      auto b = blk;
                      return cbn_forward(x, b, Mode::Train);
                    },
                    [&](const Tensor<double>& g) {
                      auto b = blk;
                      CbnCache<double> c;
                      const auto out = cbn_forward(x, b, Mode::Train, &c);
                      CbnBlock<double> gb;
                      const auto gx = cbn_backward(x, out, blk, c, g, gb);
                      std::vector<std::vector<double>> r{vec(gx.data())};
                      append(r, gb.conv);
                      append(r, gb.bn);
                      return r;
                    });
}

inline GradCheckReport branch() {
  const std::size_t w = 3;
  auto x = oracle::random_tensor(Shape{2, w, 5, 5}, 141);
  BranchBlock<double> blk{random_cbn(w, w, 142), ConvParams<double>(w, w, 3), ConvParams<double>(w, w, 3)};
  randomize(blk.conv_a, 143, 0.5);
  randomize(blk.conv_b, 144, 0.5);
  std::vector<GradVariable> vars{{"input", x.data()}};
  push(vars, "cbn.conv", blk.cbn.conv);
  push(vars, "cbn.bn", blk.cbn.bn);
  push(vars, "conv_a", blk.conv_a);
  push(vars, "conv_b", blk.conv_b);
  return grad_check(vars,
                    [&] {
                      auto b = blk;
                      return branch_forward(x, b, Mode::Train);
                    },
                    [&](const Tensor<double>& g) {
                      auto b = blk;
                      BranchCache<double> c;
                      branch_forward(x, b, Mode::Train, &c);
                      BranchBlock<double> gb;
                      const auto gx = branch_backward(x, blk, c, g, gb);
                      std::vector<std::vector<double>> r{vec(gx.data())};
                      append(r, gb.cbn.conv);
                      append(r, gb.cbn.bn);
                      append(r, gb.conv_a);
                      append(r, gb.conv_b);
                      return r;
                    });
}

inline GradCheckReport res() {
  const std::size_t w = 3;
  auto x = oracle::random_tensor(Shape{2, w, 5, 5}, 151);
  ResBlock<double> blk{ConvParams<double>(w, w, 3), BNParams<double>(w), ConvParams<double>(w, w, 3),
                       BNParams<double>(w)};
  randomize(blk.conv1, 152);
  randomize(blk.bn1, 153);
  randomize(blk.conv2, 154);
  randomize(blk.bn2, 155);
  std::vector<GradVariable> vars{{"input", x.data()}};
  push(vars, "conv1", blk.conv1);
  push(vars, "bn1", blk.bn1);
  push(vars, "conv2", blk.conv2);
  push(vars, "bn2", blk.bn2);
  return grad_check(vars,
                    [&] {
                      auto b = blk;
                      return res_forward(x, b, Mode::Train);
                    },
                    [&](const Tensor<double>& g) {
                      auto b = blk;
                      ResCache<double> c;
                      const auto out = res_forward(x, b, Mode::Train, &c);
                      ResBlock<double> gb;
                      const auto gx = res_backward(x, out, blk, c, g, gb);
                      std::vector<std::vector<double>> r{vec(gx.data())};
                      append(r, gb.conv1);
                      append(r, gb.bn1);
                      append(r, gb.conv2);
                      append(r, gb.bn2);
                      return r;
                    });
}

/// Whole network, Train mode, through the residual MSE. The checked output
/// is (T - (noisy - clean)) / sqrt(count), whose sum of squares is exactly
/// the training loss, and the analytic gradient comes from the loss
/// function's own dL/dT.
inline GradCheckReport network(std::size_t width = 4, const GradCheckOptions& opts = {}) {
  NetworkSpec spec;
  spec.width = width;
  auto net = make_network<double>(spec, 161);
  auto noisy = oracle::random_tensor(Shape{2, 1, 8, 8}, 162, 0.0, 1.0);
  const auto clean = oracle::random_tensor(Shape{2, 1, 8, 8}, 163, 0.0, 1.0);
  // Non-trivial BN affine parameters so every gradient path is exercised.
  std::uint64_t seed = 170;
  for (auto& p : parameters(net)) {
    if (p.name.find(".gamma") != std::string::npos || p.name.find(".beta") != std::string::npos) {
      std::mt19937_64 rng(seed++);
      std::uniform_real_distribution<double> u(0.5, 1.5);
      for (auto& v : p.values) v = p.name.find(".gamma") != std::string::npos ? u(rng) : u(rng) - 1.0;
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(noisy.size()));

  std::vector<GradVariable> vars{{"input", noisy.data()}};
  for (auto& p : parameters(net)) vars.push_back({p.name, p.values});
  auto forward = [&] {
    auto n = net;
    const auto pred = network_forward(noisy, n, Mode::Train);
    Tensor<double> r(pred.shape());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = (pred[i] - (noisy[i] - clean[i])) * scale;
    return r;
  };
  auto backward = [&](const Tensor<double>&) {
    auto n = net;
    NetworkTape<double> tape;
    const auto pred = network_forward(noisy, n, Mode::Train, &tape);
    const auto loss = residual_mse(pred, noisy, clean);
    auto g = network_backward(tape, net, loss.grad, true);
    // The loss also depends on the input directly through -(noisy - clean).
    for (std::size_t i = 0; i < g.input.size(); ++i) g.input[i] -= loss.grad[i];
    std::vector<std::vector<double>> r{vec(g.input.data())};
    for (auto& p : parameters(g.params)) r.push_back(vec(p.values));
    return r;
  };
  return grad_check(vars, forward, backward, opts);
}

}  // namespace cases
