#pragma once

// Three-stage training: style translation (stage 1), change segmentation
// with semantic consistency (stage 2), alternating fine-tuning (stage 3),
// plus sliding-window inference over full scenes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ccdf/config.hpp"
#include "ccdf/image.hpp"
#include "ccdf/nn.hpp"
#include "ccdf/preprocess.hpp"

namespace ccdf {

// Linear ramp lr_min -> lr_max over the first ceil(warmup_fraction * total)
// steps, then cosine decay reaching lr_min at step total - 1.
// Throws ConfigError unless 0 <= step < total_steps.
double lr_at_step(long step, long total_steps, double lr_min, double lr_max,
                  double warmup_fraction = 0.1);

// Number of warmup steps used by lr_at_step.
long warmup_steps(long total_steps, double warmup_fraction = 0.1);

// Independent stream for each consumer of the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct StageTrace {
  int stage = 0;
  // Mean batch loss of every epoch. Stage 3 records L_gen + L_seg.
  std::vector<double> epoch_loss;
  // Stage 3 only: the two components of epoch_loss.
  std::vector<double> generator_loss;
  std::vector<double> segmenter_loss;
  // Stage 3 only: phase active at the start of each epoch.
  std::vector<std::string> epoch_phase;
  long steps = 0;
  double seconds = 0.0;
};

struct TrainReport {
  std::string config_json;
  std::vector<StageTrace> stages;
  double wall_seconds = 0.0;
  // Checkpoint role ("g12", "g21", "seg") -> file name.
  std::map<std::string, std::string> checkpoints;

  const StageTrace* stage(int index) const;
  std::string to_json() const;
};

// Standardized, tiled and co-located patch grids of a scene pair.
struct TrainingPairs {
  PatchGrid t1;
  PatchGrid t2;
};

// Throws ShapeError when the scenes differ in size or band count.
TrainingPairs make_training_pairs(const ImageTensor& t1, const ImageTensor& t2,
                                  const TrainConfig& config);

// Copy of config whose network and feature-extractor band counts match an
// input with `channels` bands.
TrainConfig fit_to_bands(const TrainConfig& config, int channels);

// Networks of a run, seeded from config.rng_seed.
Generator make_generator(const TrainConfig& config, Direction direction);
SegmentationNet make_segmenter(const TrainConfig& config);

// Every stage throws ShapeError for empty or misaligned grids and
// TrainingError, naming the patch offsets, when a batch loss is not finite.

// Trains both generators on stage1_loss (cycle terms dropped when
// config.use_cycle is false).
StageTrace run_stage1(const TrainingPairs& pairs, ImageTranslator& g12, ImageTranslator& g21,
                      const FeatureExtractor& phi, const TrainConfig& config);

// Trains s on stage2_loss with g12 frozen; one augmentation per batch.
StageTrace run_stage2(const TrainingPairs& pairs, const ImageTranslator& g12, MaskPredictor& s,
                      const FeatureExtractor& phi, const TrainConfig& config);

// Alternates generator phases (L_gen of g12) and segmenter phases (L_seg of s)
// every config.alternation_period batches.
StageTrace run_stage3(const TrainingPairs& pairs, ImageTranslator& g12, MaskPredictor& s,
                      const FeatureExtractor& phi, const TrainConfig& config);

struct ChangeMapResult {
  ChangeMask probability;
  BinaryMap binary;
};

// Tiles both (already standardized) scenes, predicts every patch pair,
// stitches by mean and binarizes at config.threshold.
ChangeMapResult infer_full_image(const ImageTensor& t1, const ImageTensor& t2,
                                 const MaskPredictor& s, const TrainConfig& config);

struct PipelineResult {
  Generator g12;
  Generator g21;
  SegmentationNet segmenter;
  TrainReport report;
  ChangeMapResult after_stage2;
  ChangeMapResult final_map;
};

// All three stages on a raw scene pair, followed by full-scene inference.
PipelineResult train_pipeline(const ImageTensor& t1, const ImageTensor& t2,
                              const TrainConfig& config);

}  // namespace ccdf
