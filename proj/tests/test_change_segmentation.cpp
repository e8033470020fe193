#include <gtest/gtest.h>

#include <cmath>

#include "ccdf/change_segmentation.hpp"
#include "ccdf/errors.hpp"
#include "support.hpp"

using namespace ccdf;

namespace {

// Direct loops over a N×C×H×W image and N×1×H×W mask.
struct MaskedOracle {
  double l1 = 0.0;
  double sq = 0.0;
  double mask_mean = 0.0;
};

MaskedOracle masked_oracle(const Var& g, const Var& t, const Var& m) {
  const Shape s = g.shape();
  const auto gv = g.value();
  const auto tv = t.value();
  const auto mv = m.value();
  MaskedOracle o;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int i = 0; i < s.h * s.w; ++i) {
        const std::size_t idx = (static_cast<std::size_t>(n) * s.c + c) * s.h * s.w + i;
        const double keep = 1.0 - mv[static_cast<std::size_t>(n) * s.h * s.w + i];
        const double d = gv[idx] * keep - tv[idx] * keep;
        o.l1 += std::abs(d);
        o.sq += d * d;
      }
    }
  }
  for (double v : mv) o.mask_mean += v;
  o.mask_mean /= static_cast<double>(mv.size());
  return o;
}

}  // namespace

TEST(SegLoss, HandFixture) {
  const Var g = test::tensor({1, 1, 2, 2}, {1, 1, 1, 1});
  const Var t = test::tensor({1, 1, 2, 2}, {2, 1, 1, 1});
  const Var m = test::tensor({1, 1, 2, 2}, {1, 0, 0, 0});
  const FeatureExtractor phi = FeatureExtractor::identity();
  const LossWeights w{0.0, 0.75, 0.7, Reduction::Sum};
  const SegTerms terms = seg_terms(g, t, m, phi, w);
  EXPECT_DOUBLE_EQ(terms.l1.item(), 0.0);
  EXPECT_DOUBLE_EQ(terms.reg.item(), 0.25);
  EXPECT_DOUBLE_EQ(seg_loss(g, t, m, phi, w).item(), 0.1875);
}

TEST(SegLoss, AllOnesMaskCostsLambda) {
  std::mt19937_64 rng(1);
  const Var g = test::random_tensor({2, 3, 4, 4}, rng);
  const Var t = test::random_tensor({2, 3, 4, 4}, rng);
  const Var ones = Var::constant({2, 1, 4, 4}, 1.0);
  FeatureExtractorConfig fc;
  fc.input_bands = 3;
  fc.widths = {4};
  const FeatureExtractor phi(fc);
  for (Reduction r : {Reduction::Sum, Reduction::Mean}) {
    const LossWeights w{0.2, 0.75, 0.7, r};
    EXPECT_DOUBLE_EQ(seg_loss(g, t, ones, phi, w).item(), 0.75);
  }
}

TEST(SegLoss, ZeroMaskIsGenerationLoss) {
  std::mt19937_64 rng(2);
  const Var g = test::random_tensor({1, 3, 5, 5}, rng);
  const Var t = test::random_tensor({1, 3, 5, 5}, rng);
  const Var zeros = Var::constant({1, 1, 5, 5}, 0.0);
  FeatureExtractorConfig fc;
  fc.input_bands = 3;
  fc.widths = {4};
  const FeatureExtractor phi(fc);
  const LossWeights w{0.2, 0.75, 0.7, Reduction::Sum};
  EXPECT_NEAR(seg_loss(g, t, zeros, phi, w).item(), generation_loss_from_output(g, t, phi, w).item(),
              1e-12);
}

TEST(SegLoss, DecomposesOnRandomFixtures) {
  std::mt19937_64 rng(3);
  const FeatureExtractor phi = FeatureExtractor::identity();
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 3;
    const int c = 1 + trial % 4;
    const Var g = test::random_tensor({n, c, 5, 6}, rng, -2.0, 2.0);
    const Var t = test::random_tensor({n, c, 5, 6}, rng, -2.0, 2.0);
    const Var m = test::random_tensor({n, 1, 5, 6}, rng, 0.0, 1.0);
    const Reduction r = trial % 2 ? Reduction::Sum : Reduction::Mean;
    const LossWeights w{0.3, 0.6, 0.7, r};
    const MaskedOracle o = masked_oracle(g, t, m);
    const double count = r == Reduction::Sum ? 1.0 : static_cast<double>(g.numel());
    const double expected = o.l1 / count + 0.3 * o.sq / count + 0.6 * o.mask_mean;
    EXPECT_NEAR(seg_loss(g, t, m, phi, w).item(), expected, 1e-9);
  }
}

TEST(SegLoss, MonotoneInLambda) {
  std::mt19937_64 rng(4);
  const Var g = test::random_tensor({1, 2, 4, 4}, rng);
  const Var t = test::random_tensor({1, 2, 4, 4}, rng);
  const Var m = test::random_tensor({1, 1, 4, 4}, rng, 0.0, 1.0);
  const FeatureExtractor phi = FeatureExtractor::identity();
  double previous = -1.0;
  for (double lambda : {0.0, 0.1, 0.5, 0.75, 2.0}) {
    const double v = seg_loss(g, t, m, phi, LossWeights{0.2, lambda, 0.7, Reduction::Sum}).item();
    EXPECT_GT(v, previous);
    previous = v;
  }
}

TEST(SegLoss, Errors) {
  const FeatureExtractor phi = FeatureExtractor::identity();
  EXPECT_THROW(seg_loss(Var::constant({1, 1, 2, 2}), Var::constant({1, 1, 2, 3}),
                        Var::constant({1, 1, 2, 2}), phi, LossWeights{}),
               ShapeError);
  EXPECT_THROW(seg_loss(Var::constant({1, 2, 2, 2}), Var::constant({1, 2, 2, 2}),
                        Var::constant({1, 2, 2, 2}), phi, LossWeights{}),
               ShapeError);
  EXPECT_THROW(reg_loss(ChangeMask()), ShapeError);
}

TEST(RegLoss, MeanOfMask) {
  const ChangeMask m(2, 2, std::vector<double>{0.0, 1.0, 0.5, 0.5});
  EXPECT_DOUBLE_EQ(reg_loss(m), 0.5);
  EXPECT_DOUBLE_EQ(reg_loss(test::tensor({1, 1, 2, 2}, {0.0, 1.0, 0.5, 0.5})).item(), 0.5);
}

TEST(PredictMask, ChecksShapes) {
  const FunctionMaskPredictor wrong([](const Var& a, const Var&) { return a; });
  EXPECT_THROW(predict_mask(wrong, Var::constant({1, 2, 4, 4}), Var::constant({1, 2, 4, 4})),
               ShapeError);
  const FunctionMaskPredictor half(
      [](const Var& a, const Var&) { return Var::constant({a.shape().n, 1, a.shape().h, a.shape().w}, 0.5); });
  EXPECT_THROW(predict_mask(half, Var::constant({1, 2, 4, 4}), Var::constant({1, 2, 4, 3})),
               ShapeError);
  const ChangeMask m = predict_mask(half, ImageTensor(3, 5, 2), ImageTensor(3, 5, 2));
  EXPECT_EQ(m.width(), 3);
  EXPECT_EQ(m.height(), 5);
  EXPECT_EQ(m.at(2, 4), 0.5);
}

TEST(Binarize, ThresholdIsInclusive) {
  const ChangeMask m(4, 1, std::vector<double>{0.0, 0.4999, 0.5, 1.0});
  const BinaryMap b = binarize(m, 0.5);
  EXPECT_EQ(b.at(0, 0), 0);
  EXPECT_EQ(b.at(1, 0), 0);
  EXPECT_EQ(b.at(2, 0), 1);
  EXPECT_EQ(b.at(3, 0), 1);
  EXPECT_THROW(binarize(m, 0.0), ConfigError);
  EXPECT_THROW(binarize(m, 1.0), ConfigError);
}

TEST(Binarize, MonotoneInThreshold) {
  std::mt19937_64 rng(5);
  const ChangeMask m = test::random_mask(16, 16, rng);
  for (double lo = 0.1; lo < 0.9; lo += 0.1) {
    const BinaryMap a = binarize(m, lo);
    const BinaryMap b = binarize(m, lo + 0.05);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_GE(a.values()[i], b.values()[i]);
  }
}
