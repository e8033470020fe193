// Command-line front end: synth, train, infer, evaluate.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccdf/checkpoint.hpp"
#include "ccdf/config.hpp"
#include "ccdf/errors.hpp"
#include "ccdf/metrics.hpp"
#include "ccdf/raster_io.hpp"
#include "ccdf/synthetic.hpp"
#include "ccdf/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ccdf::IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ccdf::IoError("cannot write " + path.string());
  out << text << '\n';
}

ccdf::SyntheticSpec synthetic_spec_from_json(const std::string& text) {
  const json j = json::parse(text);
  const std::set<std::string> allowed{"width", "height",        "channels",      "gain",
                                      "bias",  "noise_sigma",   "change_regions", "rng_seed"};
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw ccdf::ConfigError("unknown key '" + key + "' in synth spec");
  }
  ccdf::SyntheticSpec spec;
  spec.width = j.value("width", spec.width);
  spec.height = j.value("height", spec.height);
  spec.channels = j.value("channels", spec.channels);
  spec.gain = j.value("gain", spec.gain);
  spec.bias = j.value("bias", spec.bias);
  spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
  spec.rng_seed = j.value("rng_seed", spec.rng_seed);
  for (const auto& r : j.value("change_regions", json::array())) {
    spec.change_regions.push_back(
        {r.at("x").get<int>(), r.at("y").get<int>(), r.at("width").get<int>(),
         r.at("height").get<int>()});
  }
  return spec;
}

// Config next to a checkpoint, or the defaults.
ccdf::TrainConfig inference_config(const std::string& config_path, const fs::path& checkpoint) {
  if (!config_path.empty()) return ccdf::load_config(config_path);
  const fs::path sibling = checkpoint.parent_path() / "config.json";
  if (fs::exists(sibling)) return ccdf::load_config(sibling);
  return ccdf::TrainConfig{};
}

fs::path probability_path(const fs::path& map_path) {
  fs::path p = map_path;
  p.replace_filename(map_path.stem().string() + "_prob" + map_path.extension().string());
  return p;
}

void save_maps(const ccdf::ChangeMapResult& maps, const fs::path& out) {
  ccdf::save_change_map(maps.binary, out);
  ccdf::save_change_map(maps.probability, probability_path(out));
}

int run_synth(const std::string& spec_path, const fs::path& out) {
  const ccdf::SyntheticSpec spec = synthetic_spec_from_json(read_text(spec_path));
  fs::create_directories(out);
  const ccdf::SyntheticPair pair = ccdf::make_synthetic_pair(spec);
  ccdf::save_raster(pair.t1, out / "t1.tif");
  ccdf::save_raster(pair.t2, out / "t2.tif");
  ccdf::save_reference_map(pair.reference, out / "reference.png");
  std::cout << "wrote " << (out / "t1.tif").string() << ", " << (out / "t2.tif").string() << ", "
            << (out / "reference.png").string() << " (" << pair.reference.count(ccdf::Label::Changed)
            << " changed pixels)\n";
  return 0;
}

int run_train(const std::string& t1_path, const std::string& t2_path,
              const std::string& config_path, const fs::path& out, const std::string& stage) {
  ccdf::TrainConfig config = ccdf::load_config(config_path);
  ccdf::apply_environment(config);
  ccdf::validate(config);
  const ccdf::ImageTensor t1 = ccdf::load_raster(t1_path);
  const ccdf::ImageTensor t2 = ccdf::load_raster(t2_path);
  fs::create_directories(out);
  const ccdf::TrainConfig cfg = ccdf::fit_to_bands(config, t1.channels());
  write_text(out / "config.json", ccdf::to_json(cfg));

  if (stage == "all") {
    ccdf::PipelineResult result = ccdf::train_pipeline(t1, t2, cfg);
    ccdf::save_generator(result.g12, out / "g12.ckpt");
    ccdf::save_generator(result.g21, out / "g21.ckpt");
    ccdf::save_segmenter(result.segmenter, out / "seg.ckpt");
    save_maps(result.final_map, out / "change_map.tif");
    result.report.checkpoints = {{"g12", "g12.ckpt"}, {"g21", "g21.ckpt"}, {"seg", "seg.ckpt"}};
    write_text(out / "report.json", result.report.to_json());
    std::cout << "trained 3 stages in " << result.report.wall_seconds << " s; "
              << result.final_map.binary.count_changed() << " changed pixels\n";
    return 0;
  }

  const auto start = std::chrono::steady_clock::now();
  const ccdf::TrainingPairs pairs = ccdf::make_training_pairs(t1, t2, cfg);
  const ccdf::FeatureExtractor phi(cfg.features);
  ccdf::TrainReport report;
  report.config_json = ccdf::to_json(cfg);
  auto require = [&](const char* name) {
    const fs::path p = out / name;
    if (!fs::exists(p)) {
      throw ccdf::IoError("stage " + stage + " needs " + p.string() + " from an earlier stage");
    }
    return p;
  };

  if (stage == "1") {
    ccdf::Generator g12 = ccdf::make_generator(cfg, ccdf::Direction::T1ToT2);
    ccdf::Generator g21 = ccdf::make_generator(cfg, ccdf::Direction::T2ToT1);
    report.stages.push_back(ccdf::run_stage1(pairs, g12, g21, phi, cfg));
    ccdf::save_generator(g12, out / "g12.ckpt");
    ccdf::save_generator(g21, out / "g21.ckpt");
    report.checkpoints = {{"g12", "g12.ckpt"}, {"g21", "g21.ckpt"}};
  } else if (stage == "2") {
    const ccdf::Generator g12 = ccdf::load_generator(require("g12.ckpt"));
    ccdf::SegmentationNet seg = ccdf::make_segmenter(cfg);
    report.stages.push_back(ccdf::run_stage2(pairs, g12, seg, phi, cfg));
    ccdf::save_segmenter(seg, out / "seg.ckpt");
    report.checkpoints = {{"seg", "seg.ckpt"}};
  } else {
    ccdf::Generator g12 = ccdf::load_generator(require("g12.ckpt"));
    ccdf::SegmentationNet seg = ccdf::load_segmenter(require("seg.ckpt"));
    report.stages.push_back(ccdf::run_stage3(pairs, g12, seg, phi, cfg));
    ccdf::save_generator(g12, out / "g12.ckpt");
    ccdf::save_segmenter(seg, out / "seg.ckpt");
    report.checkpoints = {{"g12", "g12.ckpt"}, {"seg", "seg.ckpt"}};
    const auto maps = ccdf::infer_full_image(ccdf::standardize(t1, cfg.standardize),
                                             ccdf::standardize(t2, cfg.standardize), seg, cfg);
    save_maps(maps, out / "change_map.tif");
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text(out / ("report_stage" + stage + ".json"), report.to_json());
  std::cout << "stage " << stage << " done in " << report.wall_seconds << " s\n";
  return 0;
}

int run_infer(const std::string& t1_path, const std::string& t2_path,
              const fs::path& checkpoint, const std::string& config_path, const fs::path& out) {
  const ccdf::ImageTensor t1 = ccdf::load_raster(t1_path);
  const ccdf::ImageTensor t2 = ccdf::load_raster(t2_path);
  const ccdf::TrainConfig cfg = inference_config(config_path, checkpoint);
  const ccdf::SegmentationNet seg = ccdf::load_segmenter(checkpoint);
  const auto maps = ccdf::infer_full_image(ccdf::standardize(t1, cfg.standardize),
                                           ccdf::standardize(t2, cfg.standardize), seg, cfg);
  save_maps(maps, out);
  std::cout << "wrote " << out.string() << " (" << maps.binary.count_changed()
            << " changed pixels) and " << probability_path(out).string() << "\n";
  return 0;
}

ccdf::ReferenceEncoding encoding_from_string(const std::string& s) {
  if (s == "auto") return ccdf::ReferenceEncoding::Auto;
  if (s == "color") return ccdf::ReferenceEncoding::Color;
  if (s == "integer") return ccdf::ReferenceEncoding::Integer;
  throw ccdf::ConfigError("unknown reference encoding: " + s);
}

int run_evaluate(const std::string& pred_path, const std::string& ref_path,
                 const std::string& encoding, const fs::path& report_path) {
  const ccdf::BinaryMap pred = ccdf::load_binary_map(pred_path);
  const ccdf::ReferenceMap ref = ccdf::load_reference_map(ref_path, encoding_from_string(encoding));
  const ccdf::ConfusionMatrix cm = ccdf::accumulate_confusion(pred, ref);
  const ccdf::Metrics m = ccdf::compute_metrics(cm);
  const std::string report = ccdf::metrics_report_json(cm, m);
  write_text(report_path, report);
  std::cout << report << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised bi-temporal change detection"};
  app.require_subcommand(1);

  std::string spec_path, t1, t2, config_path, out, stage = "all", checkpoint, pred, ref,
                                                   report, encoding = "auto";

  auto* synth = app.add_subcommand("synth", "Generate a synthetic bi-temporal pair");
  synth->add_option("--spec", spec_path, "Synthetic spec (JSON)")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train the three stages");
  train->add_option("--t1", t1, "T1 raster")->required()->check(CLI::ExistingFile);
  train->add_option("--t2", t2, "T2 raster")->required()->check(CLI::ExistingFile);
  train->add_option("--config", config_path, "Training config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--out", out, "Output directory")->required();
  train->add_option("--stage", stage, "Stage to run")
      ->check(CLI::IsMember({"1", "2", "3", "all"}));

  auto* infer = app.add_subcommand("infer", "Predict a change map");
  infer->add_option("--t1", t1, "T1 raster")->required()->check(CLI::ExistingFile);
  infer->add_option("--t2", t2, "T2 raster")->required()->check(CLI::ExistingFile);
  infer->add_option("--checkpoint", checkpoint, "Segmentation checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  infer->add_option("--config", config_path,
                    "Training config (default: config.json beside the checkpoint)");
  infer->add_option("--out", out, "Binary change map (probabilities go to <stem>_prob)")
      ->required();

  auto* evaluate = app.add_subcommand("evaluate", "Score a change map against a reference");
  evaluate->add_option("--pred", pred, "Predicted binary map")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--ref", ref, "Reference map")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--report", report, "Output JSON report")->required();
  evaluate->add_option("--encoding", encoding, "Reference coding")
      ->check(CLI::IsMember({"auto", "color", "integer"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return run_synth(spec_path, out);
    if (*train) return run_train(t1, t2, config_path, out, stage);
    if (*infer) return run_infer(t1, t2, checkpoint, config_path, out);
    if (*evaluate) return run_evaluate(pred, ref, encoding, report);
  } catch (const ccdf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
