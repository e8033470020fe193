#include "ccdf/cycle_consistency.hpp"

#include <cmath>

#include "ccdf/errors.hpp"

namespace ccdf {

const char* to_string(Reduction r) { return r == Reduction::Sum ? "sum" : "mean"; }

Reduction reduction_from_string(const std::string& s) {
  if (s == "sum") return Reduction::Sum;
  if (s == "mean") return Reduction::Mean;
  throw ConfigError("unknown reduction: " + s);
}

void validate(const LossWeights& w) {
  for (double v : {w.content, w.regularize, w.semantic}) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and >= 0");
  }
}

Var reduce(const Var& elementwise, Reduction reduction) {
  return reduction == Reduction::Sum ? sum(elementwise) : mean(elementwise);
}

Var l1_loss(const Var& a, const Var& b, Reduction reduction) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("l1_loss: " + a.shape().str() + " vs " + b.shape().str());
  }
  return reduce(abs(sub(b, a)), reduction);
}

Var content_loss(const Var& a, const Var& b, const FeatureExtractor& phi, Reduction reduction) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("content_loss: " + a.shape().str() + " vs " + b.shape().str());
  }
  return reduce(square(sub(phi(b), phi(a))), reduction);
}

Var generation_loss_from_output(const Var& output, const Var& target, const FeatureExtractor& phi,
                                const LossWeights& weights) {
  Var loss = l1_loss(output, target, weights.reduction);
  if (weights.content != 0.0) {
    loss = add(loss, affine(content_loss(output, target, phi, weights.reduction), weights.content, 0.0));
  }
  return loss;
}

Var generation_loss(const ImageTranslator& g, const Var& src, const Var& dst,
                    const FeatureExtractor& phi, const LossWeights& weights) {
  if (!(src.shape() == dst.shape())) {
    throw ShapeError("generation_loss: " + src.shape().str() + " vs " + dst.shape().str());
  }
  return generation_loss_from_output(g(src), dst, phi, weights);
}

Var cycle_loss(const ImageTranslator& g_ab, const ImageTranslator& g_ba, const Var& src,
               Reduction reduction) {
  return l1_loss(g_ba(g_ab(src)), src, reduction);
}

Var Stage1Terms::total(bool include_cycle) const {
  if (!include_cycle) return add(gen_t2, gen_t1);
  return add(add(gen_t2, cyc_t1), add(gen_t1, cyc_t2));
}

Stage1Terms stage1_terms(const ImageTranslator& g12, const ImageTranslator& g21, const Var& patch1,
                         const Var& patch2, const FeatureExtractor& phi,
                         const LossWeights& weights) {
  if (!(patch1.shape() == patch2.shape())) {
    throw ShapeError("stage1: " + patch1.shape().str() + " vs " + patch2.shape().str());
  }
  const Var fake2 = g12(patch1);
  const Var fake1 = g21(patch2);
  Stage1Terms t;
  t.gen_t2 = generation_loss_from_output(fake2, patch2, phi, weights);
  t.cyc_t1 = l1_loss(g21(fake2), patch1, weights.reduction);
  t.gen_t1 = generation_loss_from_output(fake1, patch1, phi, weights);
  t.cyc_t2 = l1_loss(g12(fake1), patch2, weights.reduction);
  return t;
}

Var stage1_loss(const ImageTranslator& g12, const ImageTranslator& g21, const Var& patch1,
                const Var& patch2, const FeatureExtractor& phi, const LossWeights& weights) {
  return stage1_terms(g12, g21, patch1, patch2, phi, weights).total();
}

ImageTensor translate(const ImageTranslator& g, const ImageTensor& patch) {
  NoGradGuard no_grad;
  const Var out = g(to_batch(patch));
  if (!(out.shape() == to_batch(patch).shape())) {
    throw ShapeError("translator changed the patch shape to " + out.shape().str());
  }
  return from_batch(out).front();
}

}  // namespace ccdf
