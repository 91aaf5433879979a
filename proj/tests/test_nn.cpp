#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace octden;

namespace {

ConvParams<double> random_conv(std::size_t out, std::size_t in, std::size_t k, std::uint64_t seed) {
  ConvParams<double> p(out, in, k);
  p.weights = oracle::random_tensor(p.weights.shape(), seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& b : p.bias) b = u(rng);
  return p;
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(Conv, DeltaKernelIsIdentity) {
  ConvParams<double> p(1, 1, 3);
  p.weights(0, 0, 1, 1) = 1.0;
  const auto x = oracle::random_tensor(Shape{2, 1, 5, 6}, 3);
  EXPECT_EQ(conv2d(x, p), x);
}

TEST(Conv, OnesKernelSlidingSums) {
  Tensor<double> x(Shape{1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  ConvParams<double> p(1, 1, 3);
  p.weights.fill(1.0);
  const auto y = conv2d(x, p);
  EXPECT_DOUBLE_EQ(y(0, 0, 1, 1), 45.0);
  EXPECT_DOUBLE_EQ(y(0, 0, 0, 0), 12.0);
  EXPECT_DOUBLE_EQ(y(0, 0, 2, 2), 28.0);
}

TEST(Conv, ZeroKernelGivesBias) {
  ConvParams<double> p(2, 3, 3);
  p.bias = {0.25, -1.5};
  const auto y = conv2d(oracle::random_tensor(Shape{1, 3, 4, 4}, 1), p);
  for (std::size_t yy = 0; yy < 4; ++yy)
    for (std::size_t x = 0; x < 4; ++x) {
      EXPECT_EQ(y(0, 0, yy, x), 0.25);
      EXPECT_EQ(y(0, 1, yy, x), -1.5);
    }
}

TEST(Conv, EvenKernelAndChannelMismatch) {
  EXPECT_THROW(ConvParams<double>(1, 1, 2), ShapeError);
  ConvParams<double> p(1, 2, 3);
  EXPECT_THROW(conv2d(Tensor<double>(Shape{1, 3, 4, 4}), p), ShapeError);
}

TEST(Conv, GemmMatchesDirectLoopsAndOracle) {
  const std::vector<Shape> shapes{{1, 1, 1, 1}, {2, 3, 5, 7}, {1, 4, 9, 2}, {3, 2, 13, 11}, {1, 5, 40, 33}};
  std::uint64_t seed = 10;
  for (const auto& s : shapes)
    for (std::size_t k : {1, 3, 5}) {
      const auto x = oracle::random_tensor(s, seed++);
      const auto p = random_conv(4, s.c, k, seed++);
      const auto fast = conv2d(x, p), direct = conv2d_direct(x, p), ref = oracle::conv(x, p);
      ASSERT_EQ(fast.shape(), (Shape{s.n, 4, s.h, s.w}));
      for (std::size_t i = 0; i < fast.size(); ++i) {
        ASSERT_NEAR(fast[i], direct[i], 1e-10) << s.str() << " k=" << k;
        ASSERT_NEAR(direct[i], ref[i], 1e-12);
      }
    }
}

TEST(Conv, LinearInInput) {
  auto p = random_conv(3, 2, 3, 4);
  std::fill(p.bias.begin(), p.bias.end(), 0.0);
  const auto x = oracle::random_tensor(Shape{2, 2, 6, 5}, 1), y = oracle::random_tensor(Shape{2, 2, 6, 5}, 2);
  const double a = 1.7, b = -0.6;
  Tensor<double> comb(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) comb[i] = a * x[i] + b * y[i];
  const auto lhs = conv2d(comb, p), cx = conv2d(x, p), cy = conv2d(y, p);
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], a * cx[i] + b * cy[i], 1e-10);
}

TEST(Conv, SpatialSizePreserved) {
  const auto p = random_conv(2, 1, 3, 1);
  for (std::size_t h : {1, 2, 3, 17})
    for (std::size_t w : {1, 4, 31}) {
      const auto y = conv2d(Tensor<double>(Shape{1, 1, h, w}), p);
      EXPECT_EQ(y.shape(), (Shape{1, 2, h, w}));
    }
}

TEST(Conv, ThreadCountDoesNotChangeResults) {
  const auto x = tensor_cast<float>(oracle::random_tensor(Shape{4, 8, 20, 24}, 5));
  ConvParams<float> p(8, 8, 3);
  std::mt19937_64 rng(3);
  he_init(p, rng);
  const auto g = tensor_cast<float>(oracle::random_tensor(Shape{4, 8, 20, 24}, 6));
  set_num_threads(1);
  const auto y1 = conv2d(x, p);
  const auto b1 = conv2d_backward(x, p, g);
  set_num_threads(3);
  const auto y3 = conv2d(x, p);
  const auto b3 = conv2d_backward(x, p, g);
  set_num_threads(1);
  EXPECT_EQ(y1, y3);
  EXPECT_EQ(b1.weights, b3.weights);
  EXPECT_EQ(b1.bias, b3.bias);
  EXPECT_EQ(b1.input, b3.input);
}

TEST(Conv, HeInitStatistics) {
  ConvParams<double> p(64, 64, 3);
  std::mt19937_64 rng(1);
  he_init(p, rng);
  double m = 0, v = 0;
  for (double w : p.weights.data()) m += w;
  m /= static_cast<double>(p.weights.size());
  for (double w : p.weights.data()) v += (w - m) * (w - m);
  v /= static_cast<double>(p.weights.size());
  EXPECT_NEAR(m, 0.0, 0.002);
  EXPECT_NEAR(v / (2.0 / 576.0), 1.0, 0.02);
  for (double b : p.bias) EXPECT_EQ(b, 0.0);
}

TEST(BatchNorm, HandEvaluation) {
  BNParams<double> p(1);
  p.eps = 0.0;
  Tensor<double> x(Shape{1, 1, 1, 2}, {1.0, 3.0});
  const auto y = batchnorm2d(x, p, Mode::Train);
  EXPECT_DOUBLE_EQ(y[0], -1.0);
  EXPECT_DOUBLE_EQ(y[1], 1.0);
}

TEST(BatchNorm, ZeroGammaGivesBeta) {
  BNParams<double> p(2);
  p.gamma = {0.0, 0.0};
  p.beta = {0.3, -0.7};
  const auto x = oracle::random_tensor(Shape{2, 2, 3, 3}, 8);
  for (Mode m : {Mode::Train, Mode::Infer}) {
    const auto y = batchnorm2d(x, p, m);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t i = 0; i < 9; ++i) {
        EXPECT_EQ(y.plane(b, 0)[i], 0.3);
        EXPECT_EQ(y.plane(b, 1)[i], -0.7);
      }
  }
}

TEST(BatchNorm, InferWithStandardStatsIsIdentityAndPure) {
  BNParams<double> p(3);
  p.eps = 0.0;
  const auto before = p;
  const auto x = oracle::random_tensor(Shape{2, 3, 4, 4}, 2);
  EXPECT_EQ(batchnorm2d(x, p, Mode::Infer), x);
  EXPECT_EQ(p, before);
}

TEST(BatchNorm, TrainNormalizesAndUpdatesRunningStats) {
  BNParams<double> p(3, 1e-12, 0.9);
  const auto x = oracle::random_tensor(Shape{4, 3, 5, 5}, 12, -2.0, 7.0);
  const auto ref = oracle::two_pass(x);
  const auto y = batchnorm2d(x, p, Mode::Train);
  const auto st = channel_stats(y);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_LE(std::abs(st.mean[c]), 1e-8);
    EXPECT_NEAR(st.variance[c], 1.0, 1e-6);
    EXPECT_NEAR(p.running_mean[c], 0.1 * ref.mean[c], 1e-12);
    EXPECT_NEAR(p.running_var[c], 0.9 + 0.1 * ref.var[c], 1e-12);
  }
}

TEST(BatchNorm, SingleElementTrainBatchIsDegenerate) {
  BNParams<double> p(1);
  EXPECT_THROW(batchnorm2d(Tensor<double>(Shape{1, 1, 1, 1}), p, Mode::Train), DegenerateError);
  EXPECT_NO_THROW(batchnorm2d(Tensor<double>(Shape{1, 1, 1, 1}), p, Mode::Infer));
  BNParams<double> q(2);
  EXPECT_THROW(batchnorm2d(Tensor<double>(Shape{1, 3, 2, 2}), q, Mode::Train), ShapeError);
}

TEST(Relu, Definition) {
  Tensor<double> x(Shape{1, 1, 1, 3}, {-1.0, 0.0, 2.0});
  EXPECT_EQ(relu(x), Tensor<double>(Shape{1, 1, 1, 3}, {0.0, 0.0, 2.0}));
  const auto r = oracle::random_tensor(Shape{2, 2, 3, 3}, 4);
  EXPECT_EQ(relu(relu(r)), relu(r));
  const auto pos = oracle::random_tensor(Shape{1, 2, 3, 3}, 5, 0.0, 1.0);
  EXPECT_EQ(relu(pos), pos);
}

TEST(Relu, SubgradientAtZeroIsZero) {
  Tensor<double> x(Shape{1, 1, 1, 3}, {-1.0, 0.0, 2.0});
  Tensor<double> g(Shape{1, 1, 1, 3}, {5.0, 5.0, 5.0});
  EXPECT_EQ(relu_backward(x, g), Tensor<double>(Shape{1, 1, 1, 3}, {0.0, 0.0, 5.0}));
}

TEST(GradCheck, LinearOpAgreesToMachineLevel) {
  auto x = oracle::random_tensor(Shape{1, 1, 3, 3}, 1);
  const auto rep = grad_check(
      {{"x", x.data()}},
      [&] {
        Tensor<double> y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = 2.0 * x[i];
        return y;
      },
      [&](const Tensor<double>& g) {
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = 2.0 * g[i];
        return std::vector<std::vector<double>>{gx};
      });
  EXPECT_TRUE(rep.passed);
  EXPECT_LT(rep.max_rel_error, 1e-9);
  EXPECT_EQ(rep.checked, 9u);
}

TEST(GradCheck, DetectsWrongGradient) {
  auto x = oracle::random_tensor(Shape{1, 1, 2, 2}, 1);
  const auto rep = grad_check(
      {{"x", x.data()}}, [&] { return x; },
      // Half the true gradient 2x.
      [&](const Tensor<double>&) { return std::vector<std::vector<double>>{to_vec(x.data())}; });
  EXPECT_FALSE(rep.passed);
  EXPECT_NEAR(rep.max_rel_error, 0.5, 1e-6);
}

TEST(GradCheck, NonFiniteGradientReportsLocation) {
  auto x = oracle::random_tensor(Shape{1, 1, 2, 2}, 1);
  const auto rep = grad_check(
      {{"x", x.data()}}, [&] { return x; },
      [&](const Tensor<double>& g) {
        auto v = to_vec(g.data());
        v[2] = std::numeric_limits<double>::quiet_NaN();
        return std::vector<std::vector<double>>{v};
      });
  EXPECT_FALSE(rep.passed);
  EXPECT_NE(rep.failure.find("x[2]"), std::string::npos);
}

TEST(GradCheck, Conv) {
  auto x = oracle::random_tensor(Shape{1, 2, 5, 5}, 31);
  auto p = random_conv(3, 2, 3, 32);
  const auto rep = grad_check(
      {{"input", x.data()}, {"weight", p.weights.data()}, {"bias", p.bias}},
      [&] { return conv2d(x, p); },
      [&](const Tensor<double>& g) {
        const auto cg = conv2d_backward(x, p, g);
        return std::vector<std::vector<double>>{to_vec(cg.input.data()), to_vec(cg.weights.data()), cg.bias};
      });
  EXPECT_TRUE(rep.passed) << rep.max_rel_error << " " << rep.worst << rep.failure;
  EXPECT_LE(rep.max_rel_error, 1e-4);
}

TEST(GradCheck, BatchNormTrain) {
  auto x = oracle::random_tensor(Shape{2, 3, 4, 4}, 41);
  BNParams<double> p(3);
  p.gamma = {1.3, 0.7, -0.4};
  p.beta = {0.1, -0.2, 0.3};
  const auto rep = grad_check(
      {{"input", x.data()}, {"gamma", p.gamma}, {"beta", p.beta}},
      [&] {
        BNParams<double> q = p;
        return batchnorm2d(x, q, Mode::Train);
      },
      [&](const Tensor<double>& g) {
        BNParams<double> q = p;
        BNCache<double> cache;
        batchnorm2d(x, q, Mode::Train, &cache);
        const auto bg = batchnorm2d_backward(cache, p, g);
        return std::vector<std::vector<double>>{to_vec(bg.input.data()), bg.gamma, bg.beta};
      });
  EXPECT_TRUE(rep.passed) << rep.max_rel_error << " " << rep.worst << rep.failure;
}

TEST(GradCheck, Relu) {
  // Values kept away from the kink so the finite difference is smooth.
  auto x = oracle::random_tensor(Shape{1, 2, 4, 4}, 51);
  for (auto& v : x.data()) v += v >= 0 ? 0.1 : -0.1;
  const auto rep = grad_check(
      {{"input", x.data()}}, [&] { return relu(x); },
      [&](const Tensor<double>& g) { return std::vector<std::vector<double>>{to_vec(relu_backward(x, g).data())}; });
  EXPECT_TRUE(rep.passed) << rep.max_rel_error << " " << rep.worst;
}
