#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "ccdf/errors.hpp"
#include "ccdf/nn.hpp"
#include "support.hpp"

using namespace ccdf;

namespace {

// Relative error between the analytic gradient of `f` at leaf `x` and central
// differences.
double leaf_gradient_error(Var x, const std::function<Var(const Var&)>& f, double step = 1e-6) {
  x.zero_grad();
  backward(f(x));
  const std::vector<double> analytic = x.grad();
  auto v = x.mutable_value();
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double orig = v[i];
    double plus, minus;
    {
      NoGradGuard no_grad;
      v[i] = orig + step;
      plus = f(x).item();
      v[i] = orig - step;
      minus = f(x).item();
    }
    v[i] = orig;
    const double numeric = (plus - minus) / (2.0 * step);
    diff2 += (numeric - analytic[i]) * (numeric - analytic[i]);
    a2 += analytic[i] * analytic[i];
    n2 += numeric * numeric;
  }
  return std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
}

Var random_parameter(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  const Var c = test::random_tensor(shape, rng, lo, hi);
  return Var::parameter(shape, test::values(c));
}

// Weighted sum so every output element gets a distinct upstream gradient.
Var probe(const Var& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, test::random_tensor(y.shape(), rng)));
}

}  // namespace

TEST(Autograd, ElementwiseGradients) {
  std::mt19937_64 rng(1);
  const Shape s{2, 3, 4, 5};
  const Var other = test::random_tensor(s, rng);
  const std::vector<std::pair<const char*, std::function<Var(const Var&)>>> ops = {
      {"add", [&](const Var& x) { return probe(add(x, other), 1); }},
      {"sub", [&](const Var& x) { return probe(sub(other, x), 2); }},
      {"mul", [&](const Var& x) { return probe(mul(x, x), 3); }},
      {"affine", [&](const Var& x) { return probe(affine(x, -2.5, 0.3), 4); }},
      {"square", [&](const Var& x) { return probe(square(x), 5); }},
      {"sigmoid", [&](const Var& x) { return probe(sigmoid(x), 6); }},
      {"mean", [&](const Var& x) { return mean(square(x)); }},
      {"center", [&](const Var& x) { return probe(center_planes(x), 7); }},
  };
  for (const auto& [name, f] : ops) {
    EXPECT_LE(leaf_gradient_error(random_parameter(s, rng), f), 1e-7) << name;
  }
}

TEST(Autograd, KinkedOpsAwayFromKinks) {
  std::mt19937_64 rng(2);
  const Shape s{1, 2, 3, 3};
  std::vector<double> v = test::values(test::random_tensor(s, rng, 0.1, 1.0));
  for (std::size_t i = 0; i < v.size(); i += 2) v[i] = -v[i];
  const Var x = Var::parameter(s, v);
  EXPECT_LE(leaf_gradient_error(x, [](const Var& y) { return probe(abs(y), 8); }), 1e-7);
  EXPECT_LE(leaf_gradient_error(x, [](const Var& y) { return probe(relu(y), 9); }), 1e-7);
  EXPECT_LE(leaf_gradient_error(x, [](const Var& y) { return probe(leaky_relu(y, 0.2), 10); }), 1e-7);
}

TEST(Autograd, StructuralGradients) {
  std::mt19937_64 rng(3);
  const Var mask = test::random_tensor({2, 1, 4, 4}, rng);
  EXPECT_LE(leaf_gradient_error(random_parameter({2, 3, 4, 4}, rng),
                                [&](const Var& x) { return probe(mul_channel_broadcast(x, mask), 11); }),
            1e-7);
  const Var img = test::random_tensor({2, 3, 4, 4}, rng);
  EXPECT_LE(leaf_gradient_error(random_parameter({2, 1, 4, 4}, rng),
                                [&](const Var& m) { return probe(mul_channel_broadcast(img, m), 12); }),
            1e-7);
  EXPECT_LE(leaf_gradient_error(random_parameter({1, 2, 4, 6}, rng),
                                [](const Var& x) { return probe(upsample_nearest2x(x), 13); }),
            1e-7);
  EXPECT_LE(leaf_gradient_error(random_parameter({1, 2, 4, 6}, rng),
                                [](const Var& x) { return probe(max_pool2x2(x), 14); }),
            1e-7);
  const Var b = test::random_tensor({1, 2, 3, 3}, rng);
  EXPECT_LE(leaf_gradient_error(random_parameter({1, 3, 3, 3}, rng),
                                [&](const Var& x) {
                                  return probe(slice_channels(concat_channels(b, x), 1, 3), 15);
                                }),
            1e-7);
}

TEST(Autograd, ConvolutionGradients) {
  std::mt19937_64 rng(4);
  for (int stride : {1, 2}) {
    for (int k : {1, 3}) {
      const Var x = test::random_tensor({2, 3, 6, 6}, rng);
      const Var w = test::random_tensor({4, 3, k, k}, rng);
      const Var bias = test::random_tensor({1, 4, 1, 1}, rng);
      const int pad = k / 2;
      EXPECT_LE(leaf_gradient_error(random_parameter(x.shape(), rng),
                                    [&](const Var& v) { return probe(conv2d(v, w, bias, stride, pad), 16); }),
                1e-7);
      EXPECT_LE(leaf_gradient_error(random_parameter(w.shape(), rng),
                                    [&](const Var& v) { return probe(conv2d(x, v, bias, stride, pad), 17); }),
                1e-7);
      EXPECT_LE(leaf_gradient_error(random_parameter(bias.shape(), rng),
                                    [&](const Var& v) { return probe(conv2d(x, w, v, stride, pad), 18); }),
                1e-7);
    }
  }
}

TEST(Autograd, ConvolutionHandValues) {
  // 3×3 input, 3×3 all-ones kernel, zero padding: each output is the sum of
  // its in-bounds neighbourhood.
  const Var x = test::tensor({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Var w = Var::constant({1, 1, 3, 3}, 1.0);
  const Var b = Var::constant({1, 1, 1, 1}, 0.5);
  const auto y = test::values(conv2d(x, w, b, 1, 1));
  EXPECT_DOUBLE_EQ(y[0], 1 + 2 + 4 + 5 + 0.5);
  EXPECT_DOUBLE_EQ(y[4], 45.5);
  EXPECT_DOUBLE_EQ(y[8], 5 + 6 + 8 + 9 + 0.5);
  const auto strided = conv2d(x, w, b, 2, 1);
  EXPECT_EQ(strided.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_DOUBLE_EQ(test::values(strided)[3], 28.5);
}

TEST(Autograd, CenterPlanesHasZeroMean) {
  std::mt19937_64 rng(5);
  const Var x = test::random_tensor({2, 3, 5, 4}, rng, 2.0, 7.0);
  const auto y = test::values(center_planes(x));
  for (std::size_t p = 0; p < 6; ++p) {
    double total = 0.0;
    for (std::size_t i = 0; i < 20; ++i) total += y[p * 20 + i];
    EXPECT_NEAR(total, 0.0, 1e-12);
  }
}

TEST(Autograd, NoGradGuardAndDetach) {
  Var p = Var::parameter({1, 1, 1, 2}, {1.0, 2.0});
  {
    NoGradGuard no_grad;
    EXPECT_FALSE(grad_enabled());
    EXPECT_FALSE(square(p).requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
  backward(sum(add(square(p), square(p).detach())));
  EXPECT_EQ(p.grad(), (std::vector<double>{2.0, 4.0}));
}

TEST(Autograd, GradientsAccumulateUntilCleared) {
  Var p = Var::parameter({1, 1, 1, 1}, {3.0});
  backward(square(p));
  backward(square(p));
  EXPECT_DOUBLE_EQ(p.grad()[0], 12.0);
  p.zero_grad();
  EXPECT_DOUBLE_EQ(p.grad()[0], 0.0);
}

TEST(Autograd, ShapeErrors) {
  const Var a = Var::constant({1, 2, 3, 3});
  const Var b = Var::constant({1, 2, 3, 4});
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(concat_channels(a, b), ShapeError);
  EXPECT_THROW(mul_channel_broadcast(a, Var::constant({1, 2, 3, 3})), ShapeError);
  EXPECT_THROW(slice_channels(a, 1, 2), ShapeError);
}

TEST(Networks, UntrainedGeneratorIsIdentity) {
  std::mt19937_64 rng(6);
  const Generator g(GeneratorConfig{3, 4, 1, 1, 9}, Direction::T1ToT2);
  const Var x = test::random_tensor({2, 3, 8, 8}, rng);
  EXPECT_EQ(test::values(g(x)), test::values(x));
}

TEST(Networks, ShapeSweep) {
  std::mt19937_64 rng(7);
  for (int p : {16, 32, 64}) {
    for (int c : {1, 3, 4}) {
      const Generator g(GeneratorConfig{c, 4, 2, 1, 1}, Direction::T1ToT2);
      const Var x = test::random_tensor({1, c, p, p}, rng);
      EXPECT_EQ(g(x).shape(), x.shape());
      for (Fusion f : {Fusion::Early, Fusion::Siamese}) {
        const SegmentationNet s(SegmentationConfig{c, 4, 2, f, 2});
        const Var m = s(x, test::random_tensor(x.shape(), rng));
        EXPECT_EQ(m.shape(), (Shape{1, 1, p, p}));
        for (double v : m.value()) {
          EXPECT_GE(v, 0.0);
          EXPECT_LE(v, 1.0);
        }
      }
    }
  }
}

TEST(Networks, RejectBadInputs) {
  const Generator g(GeneratorConfig{3, 4, 2, 1, 1}, Direction::T1ToT2);
  EXPECT_THROW(g(Var::constant({1, 3, 6, 6})), ShapeError);
  EXPECT_THROW(g(Var::constant({1, 4, 8, 8})), ShapeError);
  const SegmentationNet s(SegmentationConfig{3, 4, 0, Fusion::Siamese, 1});
  EXPECT_THROW(s(Var::constant({1, 3, 8, 8}), Var::constant({1, 3, 8, 4})), ShapeError);
  EXPECT_THROW(SegmentationNet(SegmentationConfig{0, 4, 0, Fusion::Early, 1}), ConfigError);
}

TEST(Networks, SeedDeterminesParameters) {
  const SegmentationConfig cfg{4, 8, 1, Fusion::Siamese, 3};
  EXPECT_EQ(parameter_digest(SegmentationNet(cfg)), parameter_digest(SegmentationNet(cfg)));
  SegmentationConfig other = cfg;
  other.seed = 4;
  EXPECT_NE(parameter_digest(SegmentationNet(cfg)), parameter_digest(SegmentationNet(other)));
}

TEST(Networks, GeneratorGradientCheck) {
  const Generator g(GeneratorConfig{1, 2, 1, 1, 5}, Direction::T1ToT2);
  ASSERT_LE(g.parameter_count(), 500u);
  test::jitter_parameters(g, 11);
  std::mt19937_64 rng(8);
  const Var x = test::random_tensor({1, 1, 4, 4}, rng);
  const Var y = test::random_tensor({1, 1, 4, 4}, rng);
  EXPECT_LE(test::gradient_check(g, [&] { return sum(square(sub(g(x), y))); }), 1e-5);
}

TEST(Networks, SegmenterGradientCheck) {
  std::mt19937_64 rng(9);
  for (Fusion f : {Fusion::Early, Fusion::Siamese}) {
    const SegmentationNet s(SegmentationConfig{1, 4, 0, f, 6});
    ASSERT_LE(s.parameter_count(), 500u);
    test::jitter_parameters(s, 12);
    const Var a = test::random_tensor({1, 1, 4, 4}, rng);
    const Var b = test::random_tensor({1, 1, 4, 4}, rng);
    EXPECT_LE(test::gradient_check(s, [&] { return probe(s(a, b), 19); }), 1e-5) << to_string(f);
  }
}

TEST(Networks, FeatureExtractorIsFrozen) {
  FeatureExtractorConfig cfg;
  cfg.input_bands = 3;
  cfg.widths = {4, 4};
  const FeatureExtractor phi(cfg);
  for (const Var& p : phi.parameters()) EXPECT_FALSE(p.requires_grad());
  const std::uint64_t before = parameter_digest(phi);
  std::mt19937_64 rng(10);
  Var x = random_parameter({1, 4, 6, 6}, rng);
  backward(sum(phi(x)));
  EXPECT_EQ(parameter_digest(phi), before);
  double norm = 0.0;
  for (double g : x.grad()) norm += std::abs(g);
  EXPECT_GT(norm, 0.0);
  // Only the leading input_bands reach φ.
  for (std::size_t i = 3 * 36; i < 4 * 36; ++i) EXPECT_EQ(x.grad()[i], 0.0);
}

TEST(Networks, IdentityExtractorPassesThrough) {
  std::mt19937_64 rng(11);
  const Var x = test::random_tensor({1, 4, 3, 3}, rng);
  EXPECT_EQ(test::values(FeatureExtractor::identity()(x)), test::values(x));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Var p = Var::parameter({1, 1, 1, 2}, {1.0, -1.0});
  Adam adam({p});
  backward(sum(mul(p, test::tensor({1, 1, 1, 2}, {3.0, -0.5}))));
  adam.step(0.1);
  EXPECT_NEAR(p.value()[0], 0.9, 1e-8);
  EXPECT_NEAR(p.value()[1], -0.9, 1e-8);
  EXPECT_EQ(adam.steps(), 1);
}

TEST(Adam, MinimizesQuadratic) {
  Var p = Var::parameter({1, 1, 1, 1}, {5.0});
  Adam adam({p});
  for (int i = 0; i < 2000; ++i) {
    adam.zero_grad();
    backward(square(affine(p, 1.0, -2.0)));
    adam.step(0.05);
  }
  EXPECT_NEAR(p.value()[0], 2.0, 1e-3);
}

TEST(Networks, CopyParameters) {
  const SegmentationNet a(SegmentationConfig{2, 4, 1, Fusion::Early, 1});
  const SegmentationNet b(SegmentationConfig{2, 4, 1, Fusion::Early, 2});
  copy_parameters(a, b);
  EXPECT_EQ(parameter_digest(a), parameter_digest(b));
  const SegmentationNet c(SegmentationConfig{2, 8, 1, Fusion::Early, 2});
  EXPECT_THROW(copy_parameters(a, c), ShapeError);
}
