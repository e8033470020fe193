#pragma once

// Versioned parameter archive shared by generators, segmentation networks
// and pretrained feature extractors.
//
// Layout (all integers little-endian):
//   "CCDFCKPT" | u32 version | u32 len + kind | u32 len + metadata (JSON text)
//   | u32 count | count × { u32 len + name | i32 n,c,h,w | n*c*h*w × f64 }

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ccdf/nn.hpp"

namespace ccdf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ParameterRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::string kind;      // "generator", "segmenter", "vgg16", ...
  std::string metadata;  // JSON object text
  std::vector<ParameterRecord> parameters;
};

Checkpoint snapshot(const Module& module, std::string kind, std::string metadata);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Writes the archived values into `module`; names and shapes must match.
void restore_parameters(const Checkpoint& checkpoint, const Module& module);

std::string to_json(const GeneratorConfig& config);
std::string to_json(const SegmentationConfig& config);
GeneratorConfig generator_config_from_json(const std::string& text);
SegmentationConfig segmentation_config_from_json(const std::string& text);

void save_generator(const Generator& g, const std::filesystem::path& path);
Generator load_generator(const std::filesystem::path& path);
void save_segmenter(const SegmentationNet& s, const std::filesystem::path& path);
SegmentationNet load_segmenter(const std::filesystem::path& path);

}  // namespace ccdf
