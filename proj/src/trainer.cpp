#include "ccdf/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <climits>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ccdf/change_segmentation.hpp"
#include "ccdf/cycle_consistency.hpp"
#include "ccdf/errors.hpp"
#include "ccdf/semantic_consistency.hpp"

namespace ccdf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_pairs(const TrainingPairs& pairs) {
  if (pairs.t1.size() == 0) throw ShapeError("training grid is empty");
  if (!aligned(pairs.t1, pairs.t2)) throw ShapeError("T1 and T2 patch grids are not aligned");
}

long batches_per_epoch(std::size_t patches, int batch_size) {
  return static_cast<long>((patches + batch_size - 1) / batch_size);
}

// Shuffled patch order of one epoch split into batches.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t patches, int batch_size,
                                                    std::mt19937_64& rng) {
  std::vector<std::size_t> order(patches);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < patches; i += batch_size) {
    const std::size_t end = std::min(patches, i + batch_size);
    batches.emplace_back(order.begin() + i, order.begin() + end);
  }
  return batches;
}

Var gather(const std::vector<ImageTensor>& patches, const std::vector<std::size_t>& idx) {
  std::vector<ImageTensor> picked;
  picked.reserve(idx.size());
  for (std::size_t i : idx) picked.push_back(patches[i]);
  return to_batch(picked);
}

void check_finite(double loss, int stage, int epoch, const PatchGrid& grid,
                  const std::vector<std::size_t>& idx) {
  if (std::isfinite(loss)) return;
  std::ostringstream msg;
  msg << "stage " << stage << ", epoch " << epoch << ": non-finite loss " << loss
      << " for patches at offsets";
  for (std::size_t i : idx) msg << " (" << grid.offsets[i].x << "," << grid.offsets[i].y << ")";
  throw TrainingError(msg.str());
}

std::vector<Var> trainable(const Module& m) {
  std::vector<Var> out;
  for (const Var& p : m.parameters()) {
    if (p.requires_grad()) out.push_back(p);
  }
  return out;
}

// g12 applied to every patch, without recording.
std::vector<ImageTensor> translate_all(const ImageTranslator& g, const PatchGrid& grid,
                                       int batch_size) {
  NoGradGuard no_grad;
  std::vector<ImageTensor> out;
  out.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); i += batch_size) {
    const std::size_t end = std::min(grid.size(), i + batch_size);
    std::vector<std::size_t> idx(end - i);
    std::iota(idx.begin(), idx.end(), i);
    for (auto& img : from_batch(g(gather(grid.patches, idx)))) out.push_back(std::move(img));
  }
  return out;
}

constexpr std::uint64_t kStreamG12 = 1;
constexpr std::uint64_t kStreamG21 = 2;
constexpr std::uint64_t kStreamSeg = 3;
constexpr std::uint64_t kStreamStage = 10;

}  // namespace

long warmup_steps(long total_steps, double warmup_fraction) {
  return static_cast<long>(std::ceil(warmup_fraction * static_cast<double>(total_steps)));
}

double lr_at_step(long step, long total_steps, double lr_min, double lr_max,
                  double warmup_fraction) {
  if (total_steps < 1 || step < 0 || step >= total_steps) {
    throw ConfigError("lr_at_step: step " + std::to_string(step) + " outside [0, " +
                      std::to_string(total_steps) + ")");
  }
  const long warmup = warmup_steps(total_steps, warmup_fraction);
  if (step < warmup) {
    return lr_min + (lr_max - lr_min) * static_cast<double>(step) / static_cast<double>(warmup);
  }
  const long span = total_steps - 1 - warmup;
  if (span <= 0) return lr_min;  // step is the final one
  const double t = static_cast<double>(step - warmup) / static_cast<double>(span);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

const StageTrace* TrainReport::stage(int index) const {
  for (const auto& s : stages) {
    if (s.stage == index) return &s;
  }
  return nullptr;
}

std::string TrainReport::to_json() const {
  nlohmann::ordered_json j;
  j["config"] = config_json.empty() ? nlohmann::ordered_json::object()
                                    : nlohmann::ordered_json::parse(config_json);
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : stages) {
    nlohmann::ordered_json js;
    js["stage"] = s.stage;
    js["epochs"] = s.epoch_loss.size();
    js["steps"] = s.steps;
    js["seconds"] = s.seconds;
    js["epoch_loss"] = s.epoch_loss;
    if (s.stage == 3) {
      js["generator_loss"] = s.generator_loss;
      js["segmenter_loss"] = s.segmenter_loss;
      js["epoch_phase"] = s.epoch_phase;
    }
    j["stages"].push_back(js);
  }
  j["wall_seconds"] = wall_seconds;
  j["checkpoints"] = checkpoints;
  return j.dump(2);
}

TrainingPairs make_training_pairs(const ImageTensor& t1, const ImageTensor& t2,
                                  const TrainConfig& config) {
  if (!t1.same_geometry(t2)) throw ShapeError("T1 and T2 rasters differ in size or band count");
  return {tile(standardize(t1, config.standardize), config.patch_size, config.overlap),
          tile(standardize(t2, config.standardize), config.patch_size, config.overlap)};
}

TrainConfig fit_to_bands(const TrainConfig& config, int channels) {
  TrainConfig cfg = config;
  cfg.generator.channels = channels;
  cfg.segmenter.channels = channels;
  if (cfg.features.kind != ExtractorKind::Identity && cfg.features.input_bands > channels) {
    cfg.features.input_bands = channels;
  }
  return cfg;
}

Generator make_generator(const TrainConfig& config, Direction direction) {
  GeneratorConfig g = config.generator;
  g.seed = derive_seed(config.rng_seed,
                       direction == Direction::T1ToT2 ? kStreamG12 : kStreamG21);
  return Generator(g, direction);
}

SegmentationNet make_segmenter(const TrainConfig& config) {
  SegmentationConfig s = config.segmenter;
  s.seed = derive_seed(config.rng_seed, kStreamSeg);
  return SegmentationNet(s);
}

StageTrace run_stage1(const TrainingPairs& pairs, ImageTranslator& g12, ImageTranslator& g21,
                      const FeatureExtractor& phi, const TrainConfig& config) {
  check_pairs(pairs);
  const auto start = Clock::now();
  std::vector<Var> params = trainable(g12);
  for (const Var& p : trainable(g21)) params.push_back(p);
  Adam adam(params, config.adam);
  std::mt19937_64 rng(derive_seed(config.rng_seed, kStreamStage + 1));

  const int epochs = config.stage_epochs[0];
  const long total = epochs * batches_per_epoch(pairs.t1.size(), config.batch_size);
  const auto& lr = config.stage_lr[0];
  StageTrace trace;
  trace.stage = 1;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    double epoch_sum = 0.0;
    const auto batches = epoch_batches(pairs.t1.size(), config.batch_size, rng);
    for (const auto& idx : batches) {
      const Var p1 = gather(pairs.t1.patches, idx);
      const Var p2 = gather(pairs.t2.patches, idx);
      const Var loss =
          stage1_terms(g12, g21, p1, p2, phi, config.weights).total(config.use_cycle);
      check_finite(loss.item(), 1, epoch, pairs.t1, idx);
      adam.zero_grad();
      backward(loss);
      adam.step(lr_at_step(trace.steps, total, lr.min, lr.max, config.warmup_fraction));
      ++trace.steps;
      epoch_sum += loss.item();
    }
    trace.epoch_loss.push_back(epoch_sum / static_cast<double>(batches.size()));
  }
  trace.seconds = seconds_since(start);
  return trace;
}

StageTrace run_stage2(const TrainingPairs& pairs, const ImageTranslator& g12, MaskPredictor& s,
                      const FeatureExtractor& phi, const TrainConfig& config) {
  check_pairs(pairs);
  const auto start = Clock::now();
  const std::vector<ImageTensor> translated = translate_all(g12, pairs.t1, config.batch_size);
  Adam adam(trainable(s), config.adam);
  std::mt19937_64 rng(derive_seed(config.rng_seed, kStreamStage + 2));

  const int epochs = config.stage_epochs[1];
  const long total = epochs * batches_per_epoch(pairs.t1.size(), config.batch_size);
  const auto& lr = config.stage_lr[1];
  StageTrace trace;
  trace.stage = 2;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    double epoch_sum = 0.0;
    const auto batches = epoch_batches(pairs.t1.size(), config.batch_size, rng);
    for (const auto& idx : batches) {
      const Var p1 = gather(pairs.t1.patches, idx);
      const Var p2 = gather(pairs.t2.patches, idx);
      const Var g_out = gather(translated, idx);
      const Augmentation aug = sample_augmentation(rng);
      const Var loss = stage2_loss(s, g_out, p1, p2, aug, phi, config.weights);
      check_finite(loss.item(), 2, epoch, pairs.t1, idx);
      adam.zero_grad();
      backward(loss);
      adam.step(lr_at_step(trace.steps, total, lr.min, lr.max, config.warmup_fraction));
      ++trace.steps;
      epoch_sum += loss.item();
    }
    trace.epoch_loss.push_back(epoch_sum / static_cast<double>(batches.size()));
  }
  trace.seconds = seconds_since(start);
  return trace;
}

StageTrace run_stage3(const TrainingPairs& pairs, ImageTranslator& g12, MaskPredictor& s,
                      const FeatureExtractor& phi, const TrainConfig& config) {
  check_pairs(pairs);
  const auto start = Clock::now();
  Adam gen_adam(trainable(g12), config.adam);
  Adam seg_adam(trainable(s), config.adam);
  std::mt19937_64 rng(derive_seed(config.rng_seed, kStreamStage + 3));

  const int epochs = config.stage_epochs[2];
  const long per_epoch = batches_per_epoch(pairs.t1.size(), config.batch_size);
  const long total = epochs * per_epoch;
  const long period = config.alternation_period > 0    ? config.alternation_period
                      : config.alternation_period == 0 ? per_epoch
                                                        : LONG_MAX;
  const auto& lr = config.stage_lr[2];
  Phase phase = config.stage3_first;
  long in_phase = 0;

  StageTrace trace;
  trace.stage = 3;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    double gen_sum = 0.0;
    double seg_sum = 0.0;
    bool phase_recorded = false;
    const auto batches = epoch_batches(pairs.t1.size(), config.batch_size, rng);
    for (const auto& idx : batches) {
      if (in_phase == period) {
        phase = phase == Phase::Generator ? Phase::Segmenter : Phase::Generator;
        in_phase = 0;
      }
      if (!phase_recorded) {
        trace.epoch_phase.push_back(to_string(phase));
        phase_recorded = true;
      }
      const Var p1 = gather(pairs.t1.patches, idx);
      const Var p2 = gather(pairs.t2.patches, idx);
      const double rate = lr_at_step(trace.steps, total, lr.min, lr.max, config.warmup_fraction);
      double gen_value = 0.0;
      double seg_value = 0.0;
      if (phase == Phase::Generator) {
        const Var g_out = g12(p1);
        const Var gen = generation_loss_from_output(g_out, p2, phi, config.weights);
        {
          NoGradGuard no_grad;
          seg_value = seg_loss(g_out.detach(), p2, predict_mask(s, p1, p2), phi, config.weights)
                          .item();
        }
        gen_value = gen.item();
        check_finite(gen_value + seg_value, 3, epoch, pairs.t1, idx);
        gen_adam.zero_grad();
        backward(gen);
        gen_adam.step(rate);
      } else {
        Var g_out;
        {
          NoGradGuard no_grad;
          g_out = g12(p1);
          gen_value = generation_loss_from_output(g_out, p2, phi, config.weights).item();
        }
        const Var seg = seg_loss(g_out, p2, predict_mask(s, p1, p2), phi, config.weights);
        seg_value = seg.item();
        check_finite(gen_value + seg_value, 3, epoch, pairs.t1, idx);
        seg_adam.zero_grad();
        backward(seg);
        seg_adam.step(rate);
      }
      ++in_phase;
      ++trace.steps;
      gen_sum += gen_value;
      seg_sum += seg_value;
    }
    const double n = static_cast<double>(batches.size());
    trace.generator_loss.push_back(gen_sum / n);
    trace.segmenter_loss.push_back(seg_sum / n);
    trace.epoch_loss.push_back((gen_sum + seg_sum) / n);
  }
  trace.seconds = seconds_since(start);
  return trace;
}

ChangeMapResult infer_full_image(const ImageTensor& t1, const ImageTensor& t2,
                                 const MaskPredictor& s, const TrainConfig& config) {
  if (!t1.same_geometry(t2)) throw ShapeError("T1 and T2 rasters differ in size or band count");
  const PatchGrid g1 = tile(t1, config.patch_size, config.overlap);
  const PatchGrid g2 = tile(t2, config.patch_size, config.overlap);
  PatchGrid masks;
  masks.offsets = g1.offsets;
  masks.source_width = g1.source_width;
  masks.source_height = g1.source_height;
  masks.patch_size = g1.patch_size;
  masks.overlap = g1.overlap;
  {
    NoGradGuard no_grad;
    for (std::size_t i = 0; i < g1.size(); i += config.batch_size) {
      const std::size_t end = std::min(g1.size(), i + config.batch_size);
      std::vector<std::size_t> idx(end - i);
      std::iota(idx.begin(), idx.end(), i);
      const Var m = predict_mask(s, gather(g1.patches, idx), gather(g2.patches, idx));
      for (auto& img : from_batch(m)) masks.patches.push_back(std::move(img));
    }
  }
  ChangeMapResult result;
  result.probability = stitch_mask(masks);
  result.binary = binarize(result.probability, config.threshold);
  return result;
}

PipelineResult train_pipeline(const ImageTensor& t1, const ImageTensor& t2,
                              const TrainConfig& config) {
  const auto start = Clock::now();
  validate(config);
  const TrainConfig cfg = fit_to_bands(config, t1.channels());

  const TrainingPairs pairs = make_training_pairs(t1, t2, cfg);
  const FeatureExtractor phi(cfg.features);
  PipelineResult result{make_generator(cfg, Direction::T1ToT2),
                        make_generator(cfg, Direction::T2ToT1),
                        make_segmenter(cfg),
                        {},
                        {},
                        {}};
  result.report.config_json = to_json(cfg);

  const ImageTensor s1 = standardize(t1, cfg.standardize);
  const ImageTensor s2 = standardize(t2, cfg.standardize);
  result.report.stages.push_back(run_stage1(pairs, result.g12, result.g21, phi, cfg));
  result.report.stages.push_back(run_stage2(pairs, result.g12, result.segmenter, phi, cfg));
  result.after_stage2 = infer_full_image(s1, s2, result.segmenter, cfg);
  result.report.stages.push_back(run_stage3(pairs, result.g12, result.segmenter, phi, cfg));
  result.final_map = infer_full_image(s1, s2, result.segmenter, cfg);
  result.report.wall_seconds = seconds_since(start);
  return result;
}

}  // namespace ccdf
