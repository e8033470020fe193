#include "ccdf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "ccdf/errors.hpp"

namespace ccdf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'C', 'D', 'F', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::vector<unsigned char>& data() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> buf) : buf_(std::move(buf)) {}
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw IoError("truncated checkpoint");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool match(const char* magic, std::size_t n) {
    need(n);
    const bool ok = std::memcmp(buf_.data() + pos_, magic, n) == 0;
    pos_ += n;
    return ok;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
};

json parse_object(const std::string& text, const char* what) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw ConfigError(std::string(what) + ": metadata is not an object");
    return j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

Checkpoint snapshot(const Module& module, std::string kind, std::string metadata) {
  Checkpoint ckpt{std::move(kind), std::move(metadata), {}};
  for (const auto& p : module.named_parameters()) {
    ckpt.parameters.push_back(
        {p.name, p.value.shape(), std::vector<double>(p.value.value().begin(), p.value.value().end())});
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& checkpoint, const fs::path& path) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.str(checkpoint.kind);
  w.str(checkpoint.metadata);
  w.u32(static_cast<std::uint32_t>(checkpoint.parameters.size()));
  for (const auto& p : checkpoint.parameters) {
    if (p.values.size() != p.shape.numel()) throw ShapeError("checkpoint record size mismatch: " + p.name);
    w.str(p.name);
    for (int d : {p.shape.n, p.shape.c, p.shape.h, p.shape.w}) w.u32(static_cast<std::uint32_t>(d));
    for (double v : p.values) w.u64(std::bit_cast<std::uint64_t>(v));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(w.data().data()), static_cast<std::streamsize>(w.data().size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing checkpoint " + path.string());
  Reader r(std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {}));
  if (!r.match(kMagic, sizeof kMagic)) throw IoError("not a checkpoint: " + path.string());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.kind = r.str();
  ckpt.metadata = r.str();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    ParameterRecord rec;
    rec.name = r.str();
    rec.shape.n = static_cast<int>(r.u32());
    rec.shape.c = static_cast<int>(r.u32());
    rec.shape.h = static_cast<int>(r.u32());
    rec.shape.w = static_cast<int>(r.u32());
    const std::size_t n = rec.shape.numel();
    r.need(n * 8);
    rec.values.resize(n);
    for (auto& v : rec.values) v = std::bit_cast<double>(r.u64());
    ckpt.parameters.push_back(std::move(rec));
  }
  if (!r.done()) throw IoError("trailing bytes in checkpoint " + path.string());
  return ckpt;
}

void restore_parameters(const Checkpoint& checkpoint, const Module& module) {
  auto params = module.named_parameters();
  if (params.size() != checkpoint.parameters.size()) {
    throw ShapeError("checkpoint has " + std::to_string(checkpoint.parameters.size()) +
                     " tensors, module expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& rec = checkpoint.parameters[i];
    if (rec.name != params[i].name || !(rec.shape == params[i].value.shape())) {
      throw ShapeError("checkpoint tensor " + rec.name + " does not match " + params[i].name);
    }
    auto dst = params[i].value.mutable_value();
    std::copy(rec.values.begin(), rec.values.end(), dst.begin());
  }
}

std::string to_json(const GeneratorConfig& c) {
  return json{{"channels", c.channels},   {"base_width", c.base_width}, {"levels", c.levels},
              {"res_blocks", c.res_blocks}, {"seed", c.seed}}
      .dump();
}

std::string to_json(const SegmentationConfig& c) {
  return json{{"channels", c.channels}, {"base_width", c.base_width}, {"levels", c.levels},
              {"fusion", to_string(c.fusion)}, {"seed", c.seed}}
      .dump();
}

GeneratorConfig generator_config_from_json(const std::string& text) {
  const json j = parse_object(text, "generator config");
  try {
    GeneratorConfig c;
    c.channels = j.at("channels").get<int>();
    c.base_width = j.at("base_width").get<int>();
    c.levels = j.at("levels").get<int>();
    c.res_blocks = j.at("res_blocks").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("generator config: ") + e.what());
  }
}

SegmentationConfig segmentation_config_from_json(const std::string& text) {
  const json j = parse_object(text, "segmentation config");
  try {
    SegmentationConfig c;
    c.channels = j.at("channels").get<int>();
    c.base_width = j.at("base_width").get<int>();
    c.levels = j.at("levels").get<int>();
    c.fusion = fusion_from_string(j.at("fusion").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("segmentation config: ") + e.what());
  }
}

void save_generator(const Generator& g, const fs::path& path) {
  json meta = json::parse(to_json(g.config()));
  meta["direction"] = to_string(g.direction());
  save_checkpoint(snapshot(g, "generator", meta.dump()), path);
}

Generator load_generator(const fs::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "generator") throw IoError(path.string() + " is not a generator checkpoint");
  const json meta = parse_object(ckpt.metadata, "generator checkpoint");
  const Direction dir =
      meta.value("direction", std::string("t1_to_t2")) == "t2_to_t1" ? Direction::T2ToT1 : Direction::T1ToT2;
  Generator g(generator_config_from_json(ckpt.metadata), dir);
  restore_parameters(ckpt, g);
  return g;
}

void save_segmenter(const SegmentationNet& s, const fs::path& path) {
  save_checkpoint(snapshot(s, "segmenter", to_json(s.config())), path);
}

SegmentationNet load_segmenter(const fs::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "segmenter") throw IoError(path.string() + " is not a segmenter checkpoint");
  SegmentationNet s(segmentation_config_from_json(ckpt.metadata));
  restore_parameters(ckpt, s);
  return s;
}

}  // namespace ccdf
