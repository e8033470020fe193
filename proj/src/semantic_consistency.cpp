#include "ccdf/semantic_consistency.hpp"

#include <span>

#include "ccdf/errors.hpp"

namespace ccdf {

namespace {

void augment_planes(std::span<const double> in, std::span<double> out, std::size_t planes, int h,
                    int w, Augmentation a) {
  if (a == Augmentation::Transpose && h != w) {
    throw ShapeError("transpose augmentation needs a square extent, got " + std::to_string(h) +
                     "x" + std::to_string(w));
  }
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = in.data() + p * plane;
    double* dst = out.data() + p * plane;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int sy = y;
        int sx = x;
        switch (a) {
          case Augmentation::Identity:
            break;
          case Augmentation::HFlip:
            sx = w - 1 - x;
            break;
          case Augmentation::VFlip:
            sy = h - 1 - y;
            break;
          case Augmentation::Transpose:
            sy = x;
            sx = y;
            break;
        }
        dst[static_cast<std::size_t>(y) * w + x] = src[static_cast<std::size_t>(sy) * w + sx];
      }
    }
  }
}

}  // namespace

const char* to_string(Augmentation a) {
  switch (a) {
    case Augmentation::Identity:
      return "identity";
    case Augmentation::HFlip:
      return "hflip";
    case Augmentation::VFlip:
      return "vflip";
    case Augmentation::Transpose:
      return "transpose";
  }
  return "?";
}

Var augment(const Var& x, Augmentation a) {
  const Shape s = x.shape();
  std::vector<double> out(s.numel());
  augment_planes(x.value(), out, static_cast<std::size_t>(s.n) * s.c, s.h, s.w, a);
  return Var::constant(s, std::move(out));
}

ImageTensor augment(const ImageTensor& x, Augmentation a) {
  ImageTensor out(x.width(), x.height(), x.channels());
  augment_planes(x.data(), out.data(), static_cast<std::size_t>(x.channels()), x.height(), x.width(), a);
  return out;
}

ChangeMask augment(const ChangeMask& m, Augmentation a) {
  ChangeMask out(m.width(), m.height());
  augment_planes(m.values(), out.values(), 1, m.height(), m.width(), a);
  return out;
}

Var restore(const Var& m, Augmentation a) { return augment(m, a); }

ChangeMask restore(const ChangeMask& m, Augmentation a) { return augment(m, a); }

Augmentation sample_augmentation(std::mt19937_64& rng) {
  return kAllAugmentations[std::uniform_int_distribution<std::size_t>(0, 3)(rng)];
}

namespace {

Var augmented_reference(const MaskPredictor& s, const Var& patch1, const Var& patch2,
                        Augmentation a) {
  NoGradGuard no_grad;
  const Var masked = predict_mask(s, augment(patch1, a), augment(patch2, a));
  return restore(masked, a);
}

}  // namespace

Var sem_loss(const MaskPredictor& s, const Var& patch1, const Var& patch2, Augmentation a,
             Reduction reduction) {
  const Var mask = predict_mask(s, patch1, patch2);
  return l1_loss(augmented_reference(s, patch1, patch2, a), mask, reduction);
}

Var Stage2Terms::total(const LossWeights& weights) const {
  Var loss = seg.total(weights);
  if (weights.semantic != 0.0) loss = add(loss, affine(sem, weights.semantic, 0.0));
  return loss;
}

Stage2Terms stage2_terms(const MaskPredictor& s, const Var& g12_output, const Var& patch1,
                         const Var& patch2, Augmentation a, const FeatureExtractor& phi,
                         const LossWeights& weights) {
  const Var mask = predict_mask(s, patch1, patch2);
  Stage2Terms t;
  t.seg = seg_terms(g12_output, patch2, mask, phi, weights);
  t.sem = l1_loss(augmented_reference(s, patch1, patch2, a), mask, weights.reduction);
  return t;
}

Var stage2_loss(const MaskPredictor& s, const Var& g12_output, const Var& patch1,
                const Var& patch2, Augmentation a, const FeatureExtractor& phi,
                const LossWeights& weights) {
  return stage2_terms(s, g12_output, patch1, patch2, a, phi, weights).total(weights);
}

}  // namespace ccdf
