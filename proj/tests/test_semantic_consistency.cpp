#include <gtest/gtest.h>

#include <set>

#include "ccdf/errors.hpp"
#include "ccdf/semantic_consistency.hpp"
#include "support.hpp"

using namespace ccdf;

namespace {

// Pointwise in space, hence equivariant to every augmentation.
FunctionMaskPredictor pointwise_stub() {
  return FunctionMaskPredictor([](const Var& a, const Var& b) {
    const Var d = sub(a, b);
    Var acc = slice_channels(square(d), 0, 1);
    for (int c = 1; c < a.shape().c; ++c) acc = add(acc, slice_channels(square(d), c, 1));
    return sigmoid(affine(acc, 1.0, -1.0));
  });
}

// Output ramps along x, so flips change it.
FunctionMaskPredictor ramp_stub() {
  return FunctionMaskPredictor([](const Var& a, const Var&) {
    const Shape s = a.shape();
    std::vector<double> v(static_cast<std::size_t>(s.n) * s.h * s.w);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % s.w) / s.w;
    return Var::constant({s.n, 1, s.h, s.w}, std::move(v));
  });
}

}  // namespace

TEST(Augment, HandExamples) {
  const Var x = test::tensor({1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(test::values(augment(x, Augmentation::Identity)), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(test::values(augment(x, Augmentation::HFlip)), (std::vector<double>{2, 1, 4, 3}));
  EXPECT_EQ(test::values(augment(x, Augmentation::VFlip)), (std::vector<double>{3, 4, 1, 2}));
  EXPECT_EQ(test::values(augment(x, Augmentation::Transpose)), (std::vector<double>{1, 3, 2, 4}));
}

TEST(Augment, ActsOnEveryPlane) {
  const Var x = test::tensor({2, 2, 1, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  EXPECT_EQ(test::values(augment(x, Augmentation::HFlip)),
            (std::vector<double>{3, 2, 1, 6, 5, 4, 9, 8, 7, 12, 11, 10}));
}

TEST(Augment, TransposeNeedsSquare) {
  EXPECT_THROW(augment(Var::constant({1, 1, 2, 3}), Augmentation::Transpose), ShapeError);
  EXPECT_NO_THROW(augment(Var::constant({1, 1, 2, 3}), Augmentation::VFlip));
}

TEST(Augment, Involutions) {
  std::mt19937_64 rng(1);
  const Var x = test::random_tensor({2, 3, 5, 5}, rng);
  const ImageTensor img = test::random_image(6, 6, 2, rng);
  for (Augmentation a : kAllAugmentations) {
    EXPECT_EQ(test::values(augment(augment(x, a), a)), test::values(x)) << to_string(a);
    EXPECT_EQ(augment(augment(img, a), a), img) << to_string(a);
  }
}

TEST(Augment, RestoreInvertsOnRandomMasks) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const int side = std::uniform_int_distribution<int>(1, 40)(rng);
    const ChangeMask m = test::random_mask(side, side, rng);
    for (Augmentation a : kAllAugmentations) {
      const ChangeMask back = restore(augment(m, a), a);
      ASSERT_TRUE(std::equal(back.values().begin(), back.values().end(), m.values().begin()));
    }
  }
}

TEST(Augment, SamplingIsSeededAndCoversAll) {
  std::mt19937_64 a(3), b(3);
  std::set<Augmentation> seen;
  for (int i = 0; i < 200; ++i) {
    const Augmentation x = sample_augmentation(a);
    EXPECT_EQ(x, sample_augmentation(b));
    seen.insert(x);
  }
  EXPECT_EQ(seen.size(), 4u);
}

TEST(SemLoss, ZeroForEquivariantPredictor) {
  std::mt19937_64 rng(4);
  const Var p1 = test::random_tensor({2, 3, 6, 6}, rng);
  const Var p2 = test::random_tensor({2, 3, 6, 6}, rng);
  const auto s = pointwise_stub();
  for (Augmentation a : kAllAugmentations) {
    EXPECT_NEAR(sem_loss(s, p1, p2, a, Reduction::Sum).item(), 0.0, 1e-12) << to_string(a);
  }
}

TEST(SemLoss, PositiveWhenPredictorIsNotEquivariant) {
  const Var p = Var::constant({1, 1, 4, 4}, 0.0);
  const auto s = ramp_stub();
  EXPECT_DOUBLE_EQ(sem_loss(s, p, p, Augmentation::Identity, Reduction::Sum).item(), 0.0);
  EXPECT_DOUBLE_EQ(sem_loss(s, p, p, Augmentation::VFlip, Reduction::Sum).item(), 0.0);
  // Row 0 1/4 2/4 3/4 against its mirror: 3/4+1/4+1/4+3/4 per row, 4 rows.
  EXPECT_DOUBLE_EQ(sem_loss(s, p, p, Augmentation::HFlip, Reduction::Sum).item(), 8.0);
}

TEST(SemLoss, AugmentedBranchIsDetached) {
  std::mt19937_64 rng(5);
  const Var p1 = test::random_tensor({2, 2, 4, 4}, rng);
  const Var p2 = test::random_tensor({2, 2, 4, 4}, rng);
  const SegmentationConfig cfg{2, 4, 0, Fusion::Siamese, 7};
  const SegmentationNet s(cfg);
  const SegmentationNet oracle(cfg);
  for (Augmentation a : {Augmentation::HFlip, Augmentation::Transpose}) {
    s.zero_grad();
    backward(sem_loss(s, p1, p2, a, Reduction::Mean));

    oracle.zero_grad();
    Var target;
    {
      NoGradGuard no_grad;
      target = augment(oracle(augment(p1, a), augment(p2, a)), a);
    }
    target = Var::constant(target.shape(), test::values(target));
    backward(l1_loss(target, oracle(p1, p2), Reduction::Mean));

    const auto ps = s.parameters();
    const auto po = oracle.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      EXPECT_LE(test::max_abs_diff(ps[i].grad(), po[i].grad()), 1e-12);
    }
  }
}

TEST(Stage2, IsSegPlusWeightedSem) {
  std::mt19937_64 rng(6);
  const Var p1 = test::random_tensor({1, 2, 4, 4}, rng);
  const Var p2 = test::random_tensor({1, 2, 4, 4}, rng);
  const Var g = test::random_tensor({1, 2, 4, 4}, rng);
  const SegmentationNet s(SegmentationConfig{2, 4, 0, Fusion::Early, 8});
  const FeatureExtractor phi = FeatureExtractor::identity();
  const LossWeights w{0.2, 0.75, 0.7, Reduction::Sum};
  const Var m = s(p1, p2);
  const double seg = seg_loss(g, p2, m, phi, w).item();
  const double sem = sem_loss(s, p1, p2, Augmentation::HFlip, Reduction::Sum).item();
  EXPECT_NEAR(stage2_loss(s, g, p1, p2, Augmentation::HFlip, phi, w).item(), seg + 0.7 * sem, 1e-12);
  const LossWeights no_sem{0.2, 0.75, 0.0, Reduction::Sum};
  EXPECT_EQ(stage2_loss(s, g, p1, p2, Augmentation::HFlip, phi, no_sem).item(),
            seg_loss(g, p2, m, phi, no_sem).item());
}

TEST(Stage2, GradientCheckOnTinySegmenter) {
  std::mt19937_64 rng(7);
  const Var p1 = test::random_tensor({1, 1, 4, 4}, rng);
  const Var p2 = test::random_tensor({1, 1, 4, 4}, rng);
  const Var g = test::random_tensor({1, 1, 4, 4}, rng);
  FeatureExtractorConfig fc;
  fc.input_bands = 1;
  fc.widths = {2};
  const FeatureExtractor phi(fc);
  for (Fusion f : {Fusion::Early, Fusion::Siamese}) {
    const SegmentationNet s(SegmentationConfig{1, 4, 0, f, 9});
    ASSERT_LE(s.parameter_count(), 500u);
    test::jitter_parameters(s, 31);
    const LossWeights w{0.2, 0.75, 0.7, Reduction::Sum};
    const auto frozen = test::stage2_with_frozen_target(s, g, p1, p2, Augmentation::Transpose, phi, w);
    EXPECT_LE(test::gradient_check(
                  s, [&] { return stage2_loss(s, g, p1, p2, Augmentation::Transpose, phi, w); },
                  frozen),
              1e-3)
        << to_string(f);
  }
}
