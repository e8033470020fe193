#include "ccdf/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ccdf/errors.hpp"

namespace ccdf {

using nlohmann::json;

const char* to_string(Phase p) { return p == Phase::Generator ? "generator" : "segmenter"; }

namespace {

Phase phase_from_string(const std::string& s) {
  if (s == "generator") return Phase::Generator;
  if (s == "segmenter") return Phase::Segmenter;
  throw ConfigError("unknown stage-3 phase: " + s);
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_generator(const json& j, GeneratorConfig& g) {
  reject_unknown(j, {"base_width", "levels", "res_blocks"}, "generator");
  read(j, "base_width", g.base_width);
  read(j, "levels", g.levels);
  read(j, "res_blocks", g.res_blocks);
}

void read_segmenter(const json& j, SegmentationConfig& s) {
  reject_unknown(j, {"base_width", "levels", "fusion"}, "segmenter");
  read(j, "base_width", s.base_width);
  read(j, "levels", s.levels);
  if (j.contains("fusion")) s.fusion = fusion_from_string(j.at("fusion").get<std::string>());
}

void read_features(const json& j, FeatureExtractorConfig& f) {
  reject_unknown(j, {"kind", "input_bands", "widths", "layers", "weights", "seed"},
                 "feature_extractor");
  if (j.contains("kind")) f.kind = extractor_kind_from_string(j.at("kind").get<std::string>());
  read(j, "input_bands", f.input_bands);
  read(j, "widths", f.widths);
  read(j, "layers", f.layers);
  read(j, "weights", f.weights);
  read(j, "seed", f.seed);
}

}  // namespace

TrainConfig preset_config(Preset preset) {
  TrainConfig cfg;
  switch (preset) {
    case Preset::Wh:
      cfg.weights = {0.2, 0.75, 0.7, Reduction::Sum};
      break;
    case Preset::Hy:
      cfg.weights = {0.4, 0.65, 0.7, Reduction::Sum};
      break;
    case Preset::Toy:
      cfg.patch_size = 64;
      cfg.overlap = 8;
      cfg.batch_size = 1;
      cfg.stage_epochs = {5, 5, 5};
      cfg.stage_lr = {LearningRateRange{1e-4, 5e-3}, LearningRateRange{1e-4, 1e-2},
                      LearningRateRange{1e-4, 1e-3}};
      cfg.weights = {0.2, 0.75, 0.7, Reduction::Mean};
      cfg.rng_seed = 1;
      cfg.generator = GeneratorConfig{4, 8, 1, 1, 0};
      cfg.segmenter = SegmentationConfig{4, 8, 0, Fusion::Siamese, 0};
      cfg.standardize.per_band = true;
      cfg.features.kind = ExtractorKind::Conv;
      cfg.features.input_bands = 3;
      cfg.features.widths = {8, 8};
      break;
  }
  return cfg;
}

Preset preset_from_string(const std::string& s) {
  if (s == "wh") return Preset::Wh;
  if (s == "hy") return Preset::Hy;
  if (s == "toy") return Preset::Toy;
  throw ConfigError("unknown preset: " + s);
}

void validate(const TrainConfig& c) {
  if (c.patch_size < 1) throw ConfigError("patch_size must be >= 1");
  if (c.overlap < 0 || c.overlap >= c.patch_size) throw ConfigError("overlap must lie in [0, patch_size)");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  for (int e : c.stage_epochs) {
    if (e < 1) throw ConfigError("stage_epochs must all be >= 1");
  }
  for (const auto& lr : c.stage_lr) {
    if (!(lr.min > 0.0) || !(lr.max > 0.0) || !std::isfinite(lr.max) || lr.min > lr.max) {
      throw ConfigError("learning rates need 0 < lr_min <= lr_max");
    }
  }
  if (!(c.warmup_fraction >= 0.0 && c.warmup_fraction < 1.0)) {
    throw ConfigError("warmup_fraction must lie in [0, 1)");
  }
  validate(c.weights);
  if (!(c.threshold > 0.0 && c.threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  if (!(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0) || !(c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0) ||
      !(c.adam.epsilon > 0.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
  if (c.generator.base_width < 1 || c.generator.levels < 0 || c.generator.res_blocks < 0) {
    throw ConfigError("invalid generator architecture");
  }
  if (c.segmenter.base_width < 1 || c.segmenter.levels < 0) {
    throw ConfigError("invalid segmenter architecture");
  }
  const int factor = 1 << std::max(c.generator.levels, c.segmenter.levels);
  if (c.patch_size % factor != 0) {
    throw ConfigError("patch_size must be divisible by 2^levels = " + std::to_string(factor));
  }
}

TrainConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"preset", "patch_size", "overlap", "batch_size", "stage_epochs", "lr_min", "lr_max",
                  "warmup_fraction", "lambda_cont", "lambda_reg", "lambda_sem", "reduction",
                  "threshold", "rng_seed", "alternation_period", "stage3_first", "use_cycle",
                  "adam_beta1", "adam_beta2", "adam_epsilon", "standardize_per_band",
                  "standardize_epsilon", "generator", "segmenter", "feature_extractor"},
                 "config");
  try {
    TrainConfig c;
    if (j.contains("preset")) c = preset_config(preset_from_string(j.at("preset").get<std::string>()));
    read(j, "patch_size", c.patch_size);
    read(j, "overlap", c.overlap);
    read(j, "batch_size", c.batch_size);
    read(j, "stage_epochs", c.stage_epochs);
    if (j.contains("lr_min")) {
      const auto v = j.at("lr_min").get<std::array<double, 3>>();
      for (int s = 0; s < 3; ++s) c.stage_lr[s].min = v[s];
    }
    if (j.contains("lr_max")) {
      const auto v = j.at("lr_max").get<std::array<double, 3>>();
      for (int s = 0; s < 3; ++s) c.stage_lr[s].max = v[s];
    }
    read(j, "warmup_fraction", c.warmup_fraction);
    read(j, "lambda_cont", c.weights.content);
    read(j, "lambda_reg", c.weights.regularize);
    read(j, "lambda_sem", c.weights.semantic);
    if (j.contains("reduction")) c.weights.reduction = reduction_from_string(j.at("reduction").get<std::string>());
    read(j, "threshold", c.threshold);
    read(j, "rng_seed", c.rng_seed);
    read(j, "alternation_period", c.alternation_period);
    if (j.contains("stage3_first")) c.stage3_first = phase_from_string(j.at("stage3_first").get<std::string>());
    read(j, "use_cycle", c.use_cycle);
    read(j, "adam_beta1", c.adam.beta1);
    read(j, "adam_beta2", c.adam.beta2);
    read(j, "adam_epsilon", c.adam.epsilon);
    read(j, "standardize_per_band", c.standardize.per_band);
    read(j, "standardize_epsilon", c.standardize.epsilon_mode);
    if (j.contains("generator")) read_generator(j.at("generator"), c.generator);
    if (j.contains("segmenter")) read_segmenter(j.at("segmenter"), c.segmenter);
    if (j.contains("feature_extractor")) read_features(j.at("feature_extractor"), c.features);
    validate(c);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::string to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["patch_size"] = c.patch_size;
  j["overlap"] = c.overlap;
  j["batch_size"] = c.batch_size;
  j["stage_epochs"] = c.stage_epochs;
  j["lr_min"] = {c.stage_lr[0].min, c.stage_lr[1].min, c.stage_lr[2].min};
  j["lr_max"] = {c.stage_lr[0].max, c.stage_lr[1].max, c.stage_lr[2].max};
  j["warmup_fraction"] = c.warmup_fraction;
  j["lambda_cont"] = c.weights.content;
  j["lambda_reg"] = c.weights.regularize;
  j["lambda_sem"] = c.weights.semantic;
  j["reduction"] = to_string(c.weights.reduction);
  j["threshold"] = c.threshold;
  j["rng_seed"] = c.rng_seed;
  j["alternation_period"] = c.alternation_period;
  j["stage3_first"] = to_string(c.stage3_first);
  j["use_cycle"] = c.use_cycle;
  j["adam_beta1"] = c.adam.beta1;
  j["adam_beta2"] = c.adam.beta2;
  j["adam_epsilon"] = c.adam.epsilon;
  j["standardize_per_band"] = c.standardize.per_band;
  j["standardize_epsilon"] = c.standardize.epsilon_mode;
  j["generator"] = {{"base_width", c.generator.base_width},
                    {"levels", c.generator.levels},
                    {"res_blocks", c.generator.res_blocks}};
  j["segmenter"] = {{"base_width", c.segmenter.base_width},
                    {"levels", c.segmenter.levels},
                    {"fusion", to_string(c.segmenter.fusion)}};
  j["feature_extractor"] = {{"kind", to_string(c.features.kind)},
                            {"input_bands", c.features.input_bands},
                            {"widths", c.features.widths},
                            {"layers", c.features.layers},
                            {"weights", c.features.weights},
                            {"seed", c.features.seed}};
  return j.dump(2);
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void apply_environment(TrainConfig& config) {
  const char* seed = std::getenv("CCDF_SEED");
  if (!seed || !*seed) return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(seed, &end, 10);
  if (end == seed || *end != '\0') throw ConfigError(std::string("CCDF_SEED is not an integer: ") + seed);
  config.rng_seed = v;
}

}  // namespace ccdf
