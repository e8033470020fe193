#pragma once

// Cycle-consistent style translation losses. Every function takes N×C×H×W
// batches; SUM reduction sums over the whole batch, MEAN averages over it.

#include <string>

#include "ccdf/autograd.hpp"
#include "ccdf/image.hpp"
#include "ccdf/nn.hpp"

namespace ccdf {

enum class Reduction { Sum, Mean };
const char* to_string(Reduction r);
Reduction reduction_from_string(const std::string& s);

struct LossWeights {
  double content = 0.2;     // λ_cont
  double regularize = 0.75;  // λ_reg
  double semantic = 0.7;    // λ_sem
  Reduction reduction = Reduction::Sum;
};

// Throws ConfigError unless every weight is finite and non-negative.
void validate(const LossWeights& weights);

// Applies the reduction to an elementwise loss tensor.
Var reduce(const Var& elementwise, Reduction reduction);

// Σ|b − a| (or its mean).
Var l1_loss(const Var& a, const Var& b, Reduction reduction);

// Σ(φ(b) − φ(a))² (or its mean); φ stays frozen.
Var content_loss(const Var& a, const Var& b, const FeatureExtractor& phi, Reduction reduction);

// l1(output, target) + λ_cont · content(output, target) for an already
// translated batch.
Var generation_loss_from_output(const Var& output, const Var& target, const FeatureExtractor& phi,
                                const LossWeights& weights);

// Translation loss of g on (src -> dst).
Var generation_loss(const ImageTranslator& g, const Var& src, const Var& dst,
                    const FeatureExtractor& phi, const LossWeights& weights);

// l1(g_ba(g_ab(src)), src).
Var cycle_loss(const ImageTranslator& g_ab, const ImageTranslator& g_ba, const Var& src,
               Reduction reduction);

struct Stage1Terms {
  Var gen_t2;  // g12 maps patch1 onto patch2
  Var cyc_t1;  // patch1 -> g12 -> g21 -> patch1
  Var gen_t1;  // g21 maps patch2 onto patch1
  Var cyc_t2;  // patch2 -> g21 -> g12 -> patch2

  Var total(bool include_cycle = true) const;
};

// The four stage-1 terms, sharing each translation between its generation
// and cycle term.
Stage1Terms stage1_terms(const ImageTranslator& g12, const ImageTranslator& g21, const Var& patch1,
                         const Var& patch2, const FeatureExtractor& phi,
                         const LossWeights& weights);

Var stage1_loss(const ImageTranslator& g12, const ImageTranslator& g21, const Var& patch1,
                const Var& patch2, const FeatureExtractor& phi, const LossWeights& weights);

// Evaluation-mode translation of a single patch.
ImageTensor translate(const ImageTranslator& g, const ImageTensor& patch);

}  // namespace ccdf
