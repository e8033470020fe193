#pragma once

// Augmentation-equivariance of the segmentation network: predicting on
// flipped/transposed inputs and undoing the augmentation should reproduce
// the direct prediction.

#include <array>
#include <random>
#include <string>

#include "ccdf/change_segmentation.hpp"

namespace ccdf {

enum class Augmentation { Identity, HFlip, VFlip, Transpose };

inline constexpr std::array<Augmentation, 4> kAllAugmentations{
    Augmentation::Identity, Augmentation::HFlip, Augmentation::VFlip, Augmentation::Transpose};

const char* to_string(Augmentation a);

// Rearranges every H×W plane; Transpose requires H == W (ShapeError otherwise).
Var augment(const Var& x, Augmentation a);
ImageTensor augment(const ImageTensor& x, Augmentation a);
ChangeMask augment(const ChangeMask& m, Augmentation a);

// Inverse of augment. Every augmentation is an involution.
Var restore(const Var& m, Augmentation a);
ChangeMask restore(const ChangeMask& m, Augmentation a);

Augmentation sample_augmentation(std::mt19937_64& rng);

// l1(restore(S(aug(p1), aug(p2))), S(p1, p2)). The augmented branch is
// evaluated without recording and detached: it only provides the target.
Var sem_loss(const MaskPredictor& s, const Var& patch1, const Var& patch2, Augmentation a,
             Reduction reduction);

struct Stage2Terms {
  SegTerms seg;
  Var sem;

  Var total(const LossWeights& weights) const;
};

// mask is S(patch1, patch2); it is shared by the seg and sem terms.
Stage2Terms stage2_terms(const MaskPredictor& s, const Var& g12_output, const Var& patch1,
                         const Var& patch2, Augmentation a, const FeatureExtractor& phi,
                         const LossWeights& weights);

// seg_loss + λ_sem · sem_loss
Var stage2_loss(const MaskPredictor& s, const Var& g12_output, const Var& patch1,
                const Var& patch2, Augmentation a, const FeatureExtractor& phi,
                const LossWeights& weights);

}  // namespace ccdf
