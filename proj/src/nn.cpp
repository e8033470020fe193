#include "ccdf/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <random>

#include "ccdf/checkpoint.hpp"
#include "ccdf/errors.hpp"

namespace ccdf {

namespace {

constexpr double kLeakySlope = 0.2;

Var lrelu(const Var& x) { return leaky_relu(x, kLeakySlope); }

// Distinct deterministic seeds for every layer of a network.
std::uint64_t layer_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

int width_at(int base, int level) { return base << level; }

void require_divisible(const Shape& s, int levels, const char* who) {
  const int factor = 1 << levels;
  if (s.h % factor != 0 || s.w % factor != 0) {
    throw ShapeError(std::string(who) + ": spatial size " + std::to_string(s.h) + "x" +
                     std::to_string(s.w) + " not divisible by " + std::to_string(factor));
  }
}

}  // namespace

std::vector<Var> Module::parameters() const {
  std::vector<Var> out;
  for (auto& p : named_parameters()) out.push_back(p.value);
  return out;
}

std::size_t Module::parameter_count() const {
  std::size_t n = 0;
  for (auto& p : named_parameters()) n += p.value.numel();
  return n;
}

void Module::zero_grad() const {
  for (auto p : parameters()) p.zero_grad();
}

std::uint64_t parameter_digest(const Module& module) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : module.named_parameters()) {
    for (double v : p.value.value()) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffu;
        h *= 0x100000001b3ull;
      }
    }
  }
  return h;
}

std::vector<double> flatten_parameters(const Module& module) {
  std::vector<double> out;
  for (const auto& p : module.named_parameters()) {
    out.insert(out.end(), p.value.value().begin(), p.value.value().end());
  }
  return out;
}

void copy_parameters(const Module& src, const Module& dst) {
  auto from = src.named_parameters();
  auto to = dst.named_parameters();
  if (from.size() != to.size()) throw ShapeError("copy_parameters: parameter count mismatch");
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i].name != to[i].name || !(from[i].value.shape() == to[i].value.shape())) {
      throw ShapeError("copy_parameters: mismatch at " + from[i].name);
    }
    auto dstv = to[i].value.mutable_value();
    auto srcv = from[i].value.value();
    std::copy(srcv.begin(), srcv.end(), dstv.begin());
  }
}

// ---------------------------------------------------------------------------

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, std::uint64_t seed,
               bool trainable)
    : stride_(stride), pad_(kernel / 2) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1 || stride < 1) {
    throw ConfigError("Conv2d: invalid geometry");
  }
  std::mt19937_64 rng(seed);
  const double bound = std::sqrt(6.0 / (in_channels * kernel * kernel));
  std::uniform_real_distribution<double> dist(-bound, bound);
  const Shape ws{out_channels, in_channels, kernel, kernel};
  std::vector<double> w(ws.numel());
  for (auto& v : w) v = dist(rng);
  const Shape bs{1, out_channels, 1, 1};
  if (trainable) {
    weight_ = Var::parameter(ws, std::move(w));
    bias_ = Var::parameter(bs, std::vector<double>(out_channels, 0.0));
  } else {
    weight_ = Var::constant(ws, std::move(w));
    bias_ = Var::constant(bs, std::vector<double>(out_channels, 0.0));
  }
}

Var Conv2d::operator()(const Var& x) const { return conv2d(x, weight_, bias_, stride_, pad_); }

void Conv2d::append_parameters(const std::string& prefix, std::vector<NamedParameter>& out) const {
  out.push_back({prefix + ".weight", weight_});
  out.push_back({prefix + ".bias", bias_});
}

const char* to_string(Direction d) { return d == Direction::T1ToT2 ? "t1_to_t2" : "t2_to_t1"; }

// ---------------------------------------------------------------------------

Generator::Generator(GeneratorConfig config, Direction direction)
    : config_(config), direction_(direction) {
  if (config.channels < 1 || config.base_width < 1 || config.levels < 0 || config.res_blocks < 0) {
    throw ConfigError("generator config: invalid sizes");
  }
  std::uint64_t idx = 0;
  const auto seed = [&] { return layer_seed(config.seed, idx++); };
  stem_ = Conv2d(config.channels, config.base_width, 3, 1, seed());
  for (int l = 0; l < config.levels; ++l) {
    down_.emplace_back(width_at(config.base_width, l), width_at(config.base_width, l + 1), 3, 2,
                       seed());
  }
  const int bottleneck = width_at(config.base_width, config.levels);
  for (int b = 0; b < config.res_blocks; ++b) {
    Conv2d first(bottleneck, bottleneck, 3, 1, seed());
    Conv2d second(bottleneck, bottleneck, 3, 1, seed());
    blocks_.emplace_back(std::move(first), std::move(second));
  }
  for (int l = config.levels; l > 0; --l) {
    up_.emplace_back(width_at(config.base_width, l), width_at(config.base_width, l - 1), 3, 1,
                     seed());
  }
  head_ = Conv2d(config.base_width, config.channels, 3, 1, seed());
  skip_ = Conv2d(config.channels, config.channels, 1, 1, seed());
  for (auto& v : head_.weight().mutable_value()) v = 0.0;
  auto sw = skip_.weight().mutable_value();
  std::fill(sw.begin(), sw.end(), 0.0);
  for (int c = 0; c < config.channels; ++c) sw[static_cast<std::size_t>(c) * config.channels + c] = 1.0;
}

Var Generator::forward(const Var& x) const {
  const Shape s = x.shape();
  if (s.c != config_.channels) {
    throw ShapeError("generator expects " + std::to_string(config_.channels) +
                     " channels, got " + s.str());
  }
  require_divisible(s, config_.levels, "generator");
  std::vector<Var> encoder;
  Var h = lrelu(stem_(x));
  for (const auto& down : down_) {
    encoder.push_back(h);
    h = lrelu(down(h));
  }
  for (const auto& [first, second] : blocks_) h = add(h, second(lrelu(first(h))));
  for (std::size_t i = 0; i < up_.size(); ++i) {
    h = add(lrelu(up_[i](upsample_nearest2x(h))), encoder[encoder.size() - 1 - i]);
  }
  return add(head_(h), skip_(x));
}

std::vector<NamedParameter> Generator::named_parameters() const {
  std::vector<NamedParameter> out;
  stem_.append_parameters("stem", out);
  for (std::size_t i = 0; i < down_.size(); ++i) down_[i].append_parameters("down" + std::to_string(i), out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].first.append_parameters("block" + std::to_string(i) + ".a", out);
    blocks_[i].second.append_parameters("block" + std::to_string(i) + ".b", out);
  }
  for (std::size_t i = 0; i < up_.size(); ++i) up_[i].append_parameters("up" + std::to_string(i), out);
  head_.append_parameters("head", out);
  skip_.append_parameters("skip", out);
  return out;
}

// ---------------------------------------------------------------------------

const char* to_string(Fusion f) { return f == Fusion::Early ? "early" : "siamese"; }

Fusion fusion_from_string(const std::string& s) {
  if (s == "early") return Fusion::Early;
  if (s == "siamese") return Fusion::Siamese;
  throw ConfigError("unknown fusion mode: " + s);
}

SegmentationNet::SegmentationNet(SegmentationConfig config) : config_(config) {
  if (config.channels < 1 || config.base_width < 1 || config.levels < 0) {
    throw ConfigError("segmentation config: invalid sizes");
  }
  std::uint64_t idx = 0;
  const auto seed = [&] { return layer_seed(config.seed, idx++); };
  const int w = config.base_width;
  if (config.fusion == Fusion::Early) {
    stem_ = Conv2d(2 * config.channels, w, 3, 1, seed());
    fuse_ = Conv2d(w, w, 3, 1, seed());
  } else {
    stem_ = Conv2d(config.channels, w, 1, 1, seed());
    fuse_ = Conv2d(w, w, 3, 1, seed());
  }
  for (int l = 0; l < config.levels; ++l) {
    down_.emplace_back(width_at(w, l), width_at(w, l + 1), 3, 2, seed());
  }
  for (int l = config.levels; l > 0; --l) {
    up_.emplace_back(width_at(w, l), width_at(w, l - 1), 3, 1, seed());
  }
  head_ = Conv2d(w, 1, 1, 1, seed());
}

Var SegmentationNet::forward(const Var& a, const Var& b) const {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("segmentation inputs differ: " + a.shape().str() + " vs " + b.shape().str());
  }
  if (a.shape().c != config_.channels) {
    throw ShapeError("segmentation net expects " + std::to_string(config_.channels) +
                     " channels, got " + a.shape().str());
  }
  require_divisible(a.shape(), config_.levels, "segmentation net");
  Var h;
  if (config_.fusion == Fusion::Early) {
    h = lrelu(fuse_(lrelu(stem_(concat_channels(a, b)))));
  } else {
    h = lrelu(fuse_(abs(sub(stem_(a), stem_(b)))));
  }
  std::vector<Var> encoder;
  for (const auto& down : down_) {
    encoder.push_back(h);
    h = lrelu(down(h));
  }
  for (std::size_t i = 0; i < up_.size(); ++i) {
    h = add(lrelu(up_[i](upsample_nearest2x(h))), encoder[encoder.size() - 1 - i]);
  }
  // Mean-only instance normalization and a 1/width output multiplier, so the
  // head bias carries the global change prior.
  return sigmoid(head_(affine(center_planes(h), 1.0 / config_.base_width, 0.0)));
}

std::vector<NamedParameter> SegmentationNet::named_parameters() const {
  std::vector<NamedParameter> out;
  stem_.append_parameters("stem", out);
  fuse_.append_parameters("fuse", out);
  for (std::size_t i = 0; i < down_.size(); ++i) down_[i].append_parameters("down" + std::to_string(i), out);
  for (std::size_t i = 0; i < up_.size(); ++i) up_[i].append_parameters("up" + std::to_string(i), out);
  head_.append_parameters("head", out);
  return out;
}

// ---------------------------------------------------------------------------

const char* to_string(ExtractorKind k) {
  switch (k) {
    case ExtractorKind::Identity:
      return "identity";
    case ExtractorKind::Conv:
      return "conv";
    case ExtractorKind::Vgg16:
      return "vgg16";
  }
  return "?";
}

ExtractorKind extractor_kind_from_string(const std::string& s) {
  if (s == "identity") return ExtractorKind::Identity;
  if (s == "conv") return ExtractorKind::Conv;
  if (s == "vgg16") return ExtractorKind::Vgg16;
  throw ConfigError("unknown feature extractor kind: " + s);
}

FeatureExtractor::FeatureExtractor(FeatureExtractorConfig config) : config_(std::move(config)) {
  if (config_.input_bands < 0) throw ConfigError("feature extractor: input_bands must be >= 0");
  if (config_.kind == ExtractorKind::Identity) return;
  if (config_.input_bands == 0) {
    throw ConfigError("feature extractor: convolutional extractors need a fixed input_bands");
  }
  std::uint64_t idx = 0;
  int in = config_.input_bands;
  if (config_.kind == ExtractorKind::Conv) {
    if (config_.widths.empty()) throw ConfigError("feature extractor: widths must not be empty");
    for (int w : config_.widths) {
      if (w < 1) throw ConfigError("feature extractor: widths must be positive");
      layers_.push_back({Op::Conv, Conv2d(in, w, 3, 1, layer_seed(config_.seed, idx++), false)});
      layers_.push_back({Op::Relu, {}});
      in = w;
    }
    return;
  }

  // torchvision vgg16().features enumeration: conv and ReLU modules per
  // entry, one max-pool module per 'M'.
  static constexpr int kLayout[] = {64, 64, 0, 128, 128, 0, 256, 256, 256, 0,
                                    512, 512, 512, 0, 512, 512, 512, 0};
  if (config_.layers < 1) throw ConfigError("feature extractor: layers must be >= 1");
  for (int entry : kLayout) {
    if (static_cast<int>(layers_.size()) >= config_.layers) break;
    if (entry == 0) {
      layers_.push_back({Op::Pool, {}});
      continue;
    }
    layers_.push_back({Op::Conv, Conv2d(in, entry, 3, 1, layer_seed(config_.seed, idx++), false)});
    in = entry;
    if (static_cast<int>(layers_.size()) >= config_.layers) break;
    layers_.push_back({Op::Relu, {}});
  }
  if (static_cast<int>(layers_.size()) < config_.layers) {
    throw ConfigError("feature extractor: VGG16 has only " + std::to_string(layers_.size()) +
                      " feature modules");
  }
  if (!config_.weights.empty()) {
    const Checkpoint ckpt = load_checkpoint(config_.weights);
    std::map<std::string, const ParameterRecord*> by_name;
    for (const auto& rec : ckpt.parameters) by_name[rec.name] = &rec;
    for (auto& p : named_parameters()) {
      auto it = by_name.find(p.name);
      if (it == by_name.end()) throw IoError("VGG16 weights missing " + p.name);
      if (!(it->second->shape == p.value.shape())) {
        throw ShapeError("VGG16 weights shape mismatch for " + p.name);
      }
      auto dst = p.value.mutable_value();
      std::copy(it->second->values.begin(), it->second->values.end(), dst.begin());
    }
  }
}

FeatureExtractor FeatureExtractor::identity() {
  FeatureExtractorConfig cfg;
  cfg.kind = ExtractorKind::Identity;
  cfg.input_bands = 0;
  cfg.widths.clear();
  return FeatureExtractor(cfg);
}

Var FeatureExtractor::forward(const Var& x) const {
  Var h = x;
  if (config_.input_bands > 0) {
    if (x.shape().c < config_.input_bands) {
      throw ShapeError("feature extractor needs " + std::to_string(config_.input_bands) +
                       " bands, got " + x.shape().str());
    }
    if (x.shape().c > config_.input_bands) h = slice_channels(x, 0, config_.input_bands);
  }
  for (const auto& layer : layers_) {
    switch (layer.op) {
      case Op::Conv:
        h = layer.conv(h);
        break;
      case Op::Relu:
        h = relu(h);
        break;
      case Op::Pool:
        h = max_pool2x2(h);
        break;
    }
  }
  return h;
}

std::vector<NamedParameter> FeatureExtractor::named_parameters() const {
  std::vector<NamedParameter> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].op == Op::Conv) layers_[i].conv.append_parameters("features." + std::to_string(i), out);
  }
  return out;
}

// ---------------------------------------------------------------------------

Adam::Adam(std::vector<Var> parameters, AdamOptions options)
    : params_(std::move(parameters)), options_(options) {
  for (const auto& p : params_) {
    if (!p.requires_grad()) throw ConfigError("Adam: parameter does not require gradients");
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step(double learning_rate) {
  ++steps_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) continue;
    const std::vector<double> g = params_[i].grad();
    auto value = params_[i].mutable_value();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g[j];
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      value[j] -= learning_rate * mhat / (std::sqrt(vhat) + options_.epsilon);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace ccdf
