#pragma once

// Small convolutional networks used by the change detection pipeline and the
// Adam optimizer that trains them. All tensors are N×C×H×W.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ccdf/autograd.hpp"

namespace ccdf {

struct NamedParameter {
  std::string name;
  Var value;
};

class Module {
 public:
  virtual ~Module() = default;
  virtual std::vector<NamedParameter> named_parameters() const = 0;

  std::vector<Var> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad() const;
};

// FNV-1a over the bit patterns of every parameter, in declaration order.
std::uint64_t parameter_digest(const Module& module);
// Flattened copy of every parameter value, in declaration order.
std::vector<double> flatten_parameters(const Module& module);

class Conv2d {
 public:
  Conv2d() = default;
  // He-uniform weights from `seed`, zero bias.
  Conv2d(int in_channels, int out_channels, int kernel, int stride, std::uint64_t seed,
         bool trainable = true);

  Var operator()(const Var& x) const;
  void append_parameters(const std::string& prefix, std::vector<NamedParameter>& out) const;

  Var& weight() { return weight_; }
  Var& bias() { return bias_; }

 private:
  Var weight_;
  Var bias_;
  int stride_ = 1;
  int pad_ = 0;
};

enum class Direction { T1ToT2, T2ToT1 };
const char* to_string(Direction d);

// Image-to-image map with identical input and output shapes.
class ImageTranslator : public Module {
 public:
  virtual Var forward(const Var& x) const = 0;
  Var operator()(const Var& x) const { return forward(x); }
};

// Two co-registered patches -> one N×1×H×W change probability map.
class MaskPredictor : public Module {
 public:
  virtual Var forward(const Var& a, const Var& b) const = 0;
  Var operator()(const Var& a, const Var& b) const { return forward(a, b); }
};

struct GeneratorConfig {
  int channels = 4;
  int base_width = 8;
  int levels = 1;      // stride-2 downsampling stages
  int res_blocks = 1;  // residual blocks at the bottleneck
  std::uint64_t seed = 1;
  bool operator==(const GeneratorConfig&) const = default;
};

// Encoder–decoder with residual bottleneck blocks plus a 1×1 skip from the
// input. The skip starts as the identity and the decoder head at zero, so an
// untrained generator returns its input.
class Generator final : public ImageTranslator {
 public:
  Generator(GeneratorConfig config, Direction direction);
  // Copies would alias the parameter storage.
  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;
  Generator(Generator&&) = default;
  Generator& operator=(Generator&&) = default;

  Var forward(const Var& x) const override;
  std::vector<NamedParameter> named_parameters() const override;

  const GeneratorConfig& config() const { return config_; }
  Direction direction() const { return direction_; }

 private:
  GeneratorConfig config_;
  Direction direction_;
  Conv2d stem_;
  std::vector<Conv2d> down_;
  std::vector<std::pair<Conv2d, Conv2d>> blocks_;
  std::vector<Conv2d> up_;
  Conv2d head_;
  Conv2d skip_;
};

enum class Fusion {
  Early,    // concatenate the two patches before the first convolution
  Siamese,  // shared linear stem on each patch, absolute feature difference
};
const char* to_string(Fusion f);
Fusion fusion_from_string(const std::string& s);

struct SegmentationConfig {
  int channels = 4;
  int base_width = 8;
  int levels = 1;
  Fusion fusion = Fusion::Siamese;
  std::uint64_t seed = 2;
  bool operator==(const SegmentationConfig&) const = default;
};

// Fully convolutional change segmenter with a logistic output layer.
class SegmentationNet final : public MaskPredictor {
 public:
  explicit SegmentationNet(SegmentationConfig config);
  SegmentationNet(const SegmentationNet&) = delete;
  SegmentationNet& operator=(const SegmentationNet&) = delete;
  SegmentationNet(SegmentationNet&&) = default;
  SegmentationNet& operator=(SegmentationNet&&) = default;

  Var forward(const Var& a, const Var& b) const override;
  std::vector<NamedParameter> named_parameters() const override;

  const SegmentationConfig& config() const { return config_; }

 private:
  SegmentationConfig config_;
  Conv2d stem_;
  Conv2d fuse_;
  std::vector<Conv2d> down_;
  std::vector<Conv2d> up_;
  Conv2d head_;
};

// Parameter-free wrappers, mainly for analytic stubs.
class FunctionTranslator final : public ImageTranslator {
 public:
  explicit FunctionTranslator(std::function<Var(const Var&)> fn) : fn_(std::move(fn)) {}
  Var forward(const Var& x) const override { return fn_(x); }
  std::vector<NamedParameter> named_parameters() const override { return {}; }

 private:
  std::function<Var(const Var&)> fn_;
};

class FunctionMaskPredictor final : public MaskPredictor {
 public:
  explicit FunctionMaskPredictor(std::function<Var(const Var&, const Var&)> fn)
      : fn_(std::move(fn)) {}
  Var forward(const Var& a, const Var& b) const override { return fn_(a, b); }
  std::vector<NamedParameter> named_parameters() const override { return {}; }

 private:
  std::function<Var(const Var&, const Var&)> fn_;
};

enum class ExtractorKind {
  Identity,  // φ(x) = x
  Conv,      // frozen conv/ReLU stack with seeded random weights
  Vgg16,     // VGG16 `features` layout truncated after `layers` modules
};
const char* to_string(ExtractorKind k);
ExtractorKind extractor_kind_from_string(const std::string& s);

struct FeatureExtractorConfig {
  ExtractorKind kind = ExtractorKind::Conv;
  // Leading bands fed to φ; 0 passes every band through.
  int input_bands = 3;
  // Conv: channel width of each layer. Vgg16: ignored.
  std::vector<int> widths{8, 8};
  // Vgg16: number of leading `features` modules kept (conv, ReLU and pool
  // each count as one module).
  int layers = 29;
  // Vgg16: checkpoint archive with the pretrained weights; empty keeps the
  // seeded random initialization.
  std::string weights;
  std::uint64_t seed = 7;
  bool operator==(const FeatureExtractorConfig&) const = default;
};

// Frozen feature map φ. Its parameters never require gradients, but
// gradients flow through it to its input.
class FeatureExtractor final : public Module {
 public:
  explicit FeatureExtractor(FeatureExtractorConfig config = {});
  static FeatureExtractor identity();

  Var forward(const Var& x) const;
  Var operator()(const Var& x) const { return forward(x); }
  std::vector<NamedParameter> named_parameters() const override;

  const FeatureExtractorConfig& config() const { return config_; }

 private:
  enum class Op { Conv, Relu, Pool };
  struct Layer {
    Op op;
    Conv2d conv;
  };

  FeatureExtractorConfig config_;
  std::vector<Layer> layers_;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Var> parameters, AdamOptions options = {});

  // One update with the gradients currently accumulated on the parameters.
  void step(double learning_rate);
  void zero_grad();
  long steps() const { return steps_; }

 private:
  std::vector<Var> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamOptions options_;
  long steps_ = 0;
};

// Copies parameter values from `src` into `dst`; names and shapes must match.
void copy_parameters(const Module& src, const Module& dst);

}  // namespace ccdf
