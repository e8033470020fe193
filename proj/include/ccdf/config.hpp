#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "ccdf/cycle_consistency.hpp"
#include "ccdf/nn.hpp"
#include "ccdf/preprocess.hpp"

namespace ccdf {

struct LearningRateRange {
  double min = 1e-5;
  double max = 3e-4;
  bool operator==(const LearningRateRange&) const = default;
};

enum class Phase { Generator, Segmenter };
const char* to_string(Phase p);

struct TrainConfig {
  int patch_size = 224;
  int overlap = 12;
  int batch_size = 10;
  std::array<int, 3> stage_epochs{30, 30, 50};
  std::array<LearningRateRange, 3> stage_lr{
      LearningRateRange{1e-5, 3e-4}, LearningRateRange{1e-5, 3e-4}, LearningRateRange{1e-5, 1e-4}};
  // Share of each stage's steps spent on the linear warmup.
  double warmup_fraction = 0.1;
  LossWeights weights{0.2, 0.75, 0.7, Reduction::Sum};
  double threshold = 0.5;
  std::uint64_t rng_seed = 0;
  // Stage-3 batches per phase: > 0 batches, 0 = one epoch, < 0 = never switch.
  long alternation_period = 0;
  Phase stage3_first = Phase::Generator;
  // Include the two cycle terms in stage 1.
  bool use_cycle = true;
  AdamOptions adam;
  StandardizeOptions standardize;
  GeneratorConfig generator;
  SegmentationConfig segmenter;
  FeatureExtractorConfig features;
};

enum class Preset { Wh, Hy, Toy };

// Reference hyperparameters for the two GF-2 scenes (WH/HY), or the small
// desk-scale setup used for the synthetic end-to-end check (Toy).
TrainConfig preset_config(Preset preset);
Preset preset_from_string(const std::string& s);

// Throws ConfigError on any out-of-range value.
void validate(const TrainConfig& config);

// Keys mirror TrainConfig field-for-field; unknown keys are rejected. An
// optional "preset" key selects the starting values the other keys override.
TrainConfig config_from_json(const std::string& text);
std::string to_json(const TrainConfig& config);
TrainConfig load_config(const std::filesystem::path& path);

// CCDF_SEED, when set, replaces rng_seed.
void apply_environment(TrainConfig& config);

}  // namespace ccdf
