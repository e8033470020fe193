#include "ccdf/change_segmentation.hpp"

#include <string>

#include "ccdf/errors.hpp"

namespace ccdf {

Var predict_mask(const MaskPredictor& s, const Var& patch1, const Var& patch2) {
  if (!(patch1.shape() == patch2.shape())) {
    throw ShapeError("predict_mask: " + patch1.shape().str() + " vs " + patch2.shape().str());
  }
  Var m = s(patch1, patch2);
  const Shape& ps = patch1.shape();
  if (!(m.shape() == Shape{ps.n, 1, ps.h, ps.w})) {
    throw ShapeError("mask predictor returned " + m.shape().str() + " for input " + ps.str());
  }
  return m;
}

ChangeMask predict_mask(const MaskPredictor& s, const ImageTensor& patch1,
                        const ImageTensor& patch2) {
  NoGradGuard no_grad;
  return masks_from_batch(predict_mask(s, to_batch(patch1), to_batch(patch2))).front();
}

Var reg_loss(const Var& mask) {
  if (mask.numel() == 0) throw ShapeError("reg_loss: empty mask");
  return mean(mask);
}

double reg_loss(const ChangeMask& mask) {
  if (mask.empty()) throw ShapeError("reg_loss: empty mask");
  double total = 0.0;
  for (double v : mask.values()) total += v;
  return total / static_cast<double>(mask.size());
}

Var SegTerms::total(const LossWeights& weights) const {
  Var loss = l1;
  if (weights.content != 0.0) loss = add(loss, affine(content, weights.content, 0.0));
  if (weights.regularize != 0.0) loss = add(loss, affine(reg, weights.regularize, 0.0));
  return loss;
}

SegTerms seg_terms(const Var& g12_output, const Var& patch2, const Var& mask,
                   const FeatureExtractor& phi, const LossWeights& weights) {
  if (!(g12_output.shape() == patch2.shape())) {
    throw ShapeError("seg_loss: " + g12_output.shape().str() + " vs " + patch2.shape().str());
  }
  const Var keep = affine(mask, -1.0, 1.0);
  const Var fake = mul_channel_broadcast(g12_output, keep);
  const Var real = mul_channel_broadcast(patch2, keep);
  SegTerms t;
  t.l1 = l1_loss(fake, real, weights.reduction);
  t.content = weights.content != 0.0 ? content_loss(fake, real, phi, weights.reduction) : Var::scalar(0.0);
  t.reg = reg_loss(mask);
  return t;
}

Var seg_loss(const Var& g12_output, const Var& patch2, const Var& mask, const FeatureExtractor& phi,
             const LossWeights& weights) {
  return seg_terms(g12_output, patch2, mask, phi, weights).total(weights);
}

BinaryMap binarize(const ChangeMask& mask, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("binarize: threshold must lie in (0,1), got " + std::to_string(threshold));
  }
  BinaryMap out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    out.values()[i] = mask.values()[i] >= threshold ? 1 : 0;
  }
  return out;
}

}  // namespace ccdf
