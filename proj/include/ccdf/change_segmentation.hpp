#pragma once

// Mask-gated reconstruction: regions the generator cannot reproduce are
// absorbed into the change mask M, which is kept sparse by mean(M).

#include "ccdf/cycle_consistency.hpp"
#include "ccdf/image.hpp"
#include "ccdf/nn.hpp"

namespace ccdf {

// N×1×H×W probabilities from S(patch1, patch2).
Var predict_mask(const MaskPredictor& s, const Var& patch1, const Var& patch2);
// Evaluation-mode prediction for one patch pair.
ChangeMask predict_mask(const MaskPredictor& s, const ImageTensor& patch1,
                        const ImageTensor& patch2);

// mean(M); throws ShapeError for an empty mask.
Var reg_loss(const Var& mask);
double reg_loss(const ChangeMask& mask);

struct SegTerms {
  Var l1;       // l1(g_out ⊙ (1−M), patch2 ⊙ (1−M))
  Var content;  // content loss on the same masked pair
  Var reg;      // mean(M)

  Var total(const LossWeights& weights) const;
};

// M is single-channel and broadcasts over every image channel.
SegTerms seg_terms(const Var& g12_output, const Var& patch2, const Var& mask,
                   const FeatureExtractor& phi, const LossWeights& weights);

Var seg_loss(const Var& g12_output, const Var& patch2, const Var& mask, const FeatureExtractor& phi,
             const LossWeights& weights);

// 1 where value >= threshold; threshold must lie in (0, 1).
BinaryMap binarize(const ChangeMask& mask, double threshold);

}  // namespace ccdf
