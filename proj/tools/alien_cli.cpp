// Command-line front end for the detection pipeline: synthetic data
// generation, training, fully convolutional inference, evaluation and
// overlay export.
//
// Exit codes: 0 success, 2 invalid configuration or malformed model/spec
// input, 3 I/O failure, 4 diverged training.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "alien/alien.hpp"

namespace fs = std::filesystem;
using namespace alien;

namespace {

// Merged settings from a config file plus flag overrides. Sections mirror
// the owning modules; unknown keys are rejected before any work starts.
struct RunConfig {
  SceneSpec scene;
  ChipPolicy chips{400, 0.5, true};
  TrainConfig train;
  InferenceConfig infer;
  double eval_match_radius = 8.0;
  bool eval_fold_orientation = false;

  static bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(Errc::bad_config, key + ": expected true/false");
  }

  void apply(const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
      auto num = [&] { return detail::parse_double(value, key); };
      auto integer = [&] { return static_cast<int>(num()); };
      if (key == "scene.width") scene.width = integer();
      else if (key == "scene.height") scene.height = integer();
      else if (key == "scene.target_count") scene.target_count = integer();
      else if (key == "scene.target_length") scene.target_length = num();
      else if (key == "scene.target_width") scene.target_width = num();
      else if (key == "scene.background_gray") scene.background.base_gray = num();
      else if (key == "scene.background_noise") scene.background.noise_amplitude = num();
      else if (key == "scene.min_separation") scene.min_separation = num();
      else if (key == "chips.count") chips.count = integer();
      else if (key == "chips.positive_fraction") chips.positive_fraction = num();
      else if (key == "chips.jitter") chips.jitter = parse_bool(value, key);
      else if (key == "train.epochs") train.epochs = integer();
      else if (key == "train.batch_size") train.batch_size = integer();
      else if (key == "train.learning_rate") train.learning_rate = num();
      else if (key == "train.beta1") train.beta1 = num();
      else if (key == "train.beta2") train.beta2 = num();
      else if (key == "train.epsilon") train.epsilon = num();
      else if (key == "train.seed") train.seed = static_cast<std::uint64_t>(num());
      else if (key == "train.checkpoint_interval") train.checkpoint_interval = integer();
      else if (key == "train.augment") train.augment = parse_bool(value, key);
      else if (key == "train.threads") train.threads = integer();
      else if (key == "train.lambda") parse_lambda(value);
      else if (key == "infer.threshold") infer.threshold = num();
      else if (key == "infer.merge_radius") infer.merge_radius = num();
      else if (key == "infer.threads") infer.tile_parallelism = integer();
      else if (key == "eval.match_radius") eval_match_radius = num();
      else if (key == "eval.fold_orientation") eval_fold_orientation = parse_bool(value, key);
      else fail(Errc::bad_config, "unknown config key: " + key);
    }
  }

  void parse_lambda(const std::string& csv) {
    std::vector<double> vals;
    std::string cur;
    for (char c : csv + ",") {
      if (c == ',') {
        if (!cur.empty()) vals.push_back(detail::parse_double(cur, "train.lambda"));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (vals.size() != kFeaturesPerAnchor)
      fail(Errc::bad_config, "train.lambda expects 9 comma-separated values");
    for (int i = 0; i < kFeaturesPerAnchor; ++i) train.weights.lambda[i] = vals[i];
  }

  // Effective settings, echoed verbatim so runs are reconstructible from
  // their logs.
  std::map<std::string, std::string> effective() const {
    std::map<std::string, std::string> kv;
    auto put = [&](const std::string& k, double v) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%g", v);
      kv[k] = buf;
    };
    put("scene.width", scene.width);
    put("scene.height", scene.height);
    put("scene.target_count", scene.target_count);
    put("scene.target_length", scene.target_length);
    put("scene.target_width", scene.target_width);
    put("scene.background_gray", scene.background.base_gray);
    put("scene.background_noise", scene.background.noise_amplitude);
    put("scene.min_separation", scene.min_separation);
    put("chips.count", chips.count);
    put("chips.positive_fraction", chips.positive_fraction);
    kv["chips.jitter"] = chips.jitter ? "true" : "false";
    put("train.epochs", train.epochs);
    put("train.batch_size", train.batch_size);
    put("train.learning_rate", train.learning_rate);
    put("train.beta1", train.beta1);
    put("train.beta2", train.beta2);
    put("train.epsilon", train.epsilon);
    put("train.seed", static_cast<double>(train.seed));
    put("train.checkpoint_interval", train.checkpoint_interval);
    kv["train.augment"] = train.augment ? "true" : "false";
    put("train.threads", train.threads);
    std::string lambda;
    for (int i = 0; i < kFeaturesPerAnchor; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%g", train.weights.lambda[i]);
      lambda += (i ? "," : "") + std::string(buf);
    }
    kv["train.lambda"] = lambda;
    put("infer.threshold", infer.threshold);
    put("infer.merge_radius", infer.merge_radius);
    put("infer.threads", infer.tile_parallelism);
    put("eval.match_radius", eval_match_radius);
    kv["eval.fold_orientation"] = eval_fold_orientation ? "true" : "false";
    return kv;
  }

  void echo() const {
    for (const auto& [k, v] : effective()) std::cout << k << " = " << v << "\n";
  }
};

// ALIEN_THREADS caps advisory parallelism from the environment.
int thread_cap(int requested) {
  if (const char* env = std::getenv("ALIEN_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) return std::min(requested, cap);
  }
  return std::max(1, requested);
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (!path.empty()) cfg.apply(parse_config_file(path));
  return cfg;
}

std::string scene_name(int index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04d.%s", index, ext);
  return buf;
}

int cmd_synth(const std::string& spec_path, std::uint64_t seed,
              const std::string& out_dir, int count) {
  RunConfig cfg = load_config(spec_path);
  cfg.echo();
  if (count < 1) fail(Errc::bad_config, "--count must be >= 1");
  if (!fs::is_directory(out_dir))
    fail(Errc::io_failure, "output directory does not exist: " + out_dir);
  for (int i = 0; i < count; ++i) {
    const Scene scene = generate_scene(cfg.scene, mix_seed(seed, i));
    const fs::path img_path = fs::path(out_dir) / scene_name(i, "ppm");
    write_ppm(scene.image, img_path);
    write_truth(scene.truth.targets, fs::path(out_dir) / scene_name(i, "truth"));
    std::cout << img_path.filename().string() << ": " << scene.truth.targets.size()
              << " targets (" << cfg.scene.width << "x" << cfg.scene.height << ")\n";
  }
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_path, std::int64_t seed_override) {
  RunConfig cfg = load_config(config_path);
  if (seed_override >= 0) cfg.train.seed = static_cast<std::uint64_t>(seed_override);
  cfg.train.threads = thread_cap(cfg.train.threads);
  cfg.echo();
  cfg.train.validate();

  if (!fs::is_directory(data_dir))
    fail(Errc::io_failure, "data directory does not exist: " + data_dir);
  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(data_dir))
    if (entry.path().extension() == ".ppm") images.push_back(entry.path());
  std::sort(images.begin(), images.end());
  if (images.empty()) fail(Errc::io_failure, "no .ppm scenes in " + data_dir);

  const AnchorLayout layout = build_layout();
  std::vector<ChipSample> dataset;
  for (std::size_t i = 0; i < images.size(); ++i) {
    fs::path truth_path = images[i];
    truth_path.replace_extension(".truth");
    const Image image = read_ppm(images[i]);
    SceneTruth truth;
    truth.targets = read_truth(truth_path);
    truth.width = image.width;
    truth.height = image.height;
    const auto chips = sample_chips(image, truth, layout, cfg.chips,
                                    mix_seed(cfg.train.seed, 0xDA7A, i));
    dataset.insert(dataset.end(), chips.begin(), chips.end());
  }
  std::cout << "dataset: " << dataset.size() << " chips from " << images.size()
            << " scenes\n";

  cfg.train.checkpoint_path = out_path + ".ckpt";
  TrainResult result = train(dataset, cfg.train);
  save_weights(result.model, out_path);
  write_history(result.history, out_path + ".history");
  if (!result.history.epochs.empty())
    std::cout << "final epoch loss: "
              << result.history.epochs.back().mean_loss << "\n";
  std::cout << "weights written to " << out_path << "\n";
  return 0;
}

int cmd_infer(const std::string& weights_path, const std::string& image_path,
              const std::string& out_path, const std::string& config_path,
              double threshold, double merge_radius) {
  RunConfig cfg = load_config(config_path);
  if (threshold >= 0) cfg.infer.threshold = threshold;
  if (merge_radius >= 0) cfg.infer.merge_radius = merge_radius;
  cfg.infer.tile_parallelism = thread_cap(cfg.infer.tile_parallelism);
  cfg.echo();
  cfg.infer.validate();

  const Model model = load_weights(weights_path);
  const Image image = read_ppm(image_path);
  const AnchorLayout layout = build_layout();
  const auto cells = cells_covering(image.width, image.height, layout);
  const auto detections = infer_image(model, image, layout, cfg.infer);
  write_detections(detections, out_path);
  std::cout << "cells: " << cells.size() << "\n";
  std::cout << "detections: " << detections.size() << "\n";
  return 0;
}

int cmd_eval(const std::string& det_path, const std::string& truth_path,
             double radius, bool fold, const std::string& out_path) {
  const auto detections = read_detections(det_path);
  const auto truth = read_truth(truth_path);
  const Matching matching = match_detections(detections, truth, radius);
  const EvalReport report = compute_metrics(matching, detections, truth, fold);
  const std::string text = format_report(report);
  std::cout << text;
  if (!out_path.empty()) atomic_write(out_path, text);
  return 0;
}

int cmd_render(const std::string& image_path, const std::string& det_path,
               const std::string& out_path, const std::string& raster_path) {
  const auto detections = read_detections(det_path);
  write_overlay(detections, out_path);
  std::cout << "overlay records: " << detections.size() << "\n";
  if (!raster_path.empty()) {
    const Image image = read_ppm(image_path);
    write_ppm(render_overlay(image, detections), raster_path);
    std::cout << "raster written to " << raster_path << "\n";
  }
  return 0;
}

int cmd_resample(const std::string& image_path, double scale,
                 const std::string& out_path) {
  if (!(scale > 0)) fail(Errc::bad_config, "--scale must be > 0");
  const Image image = read_ppm(image_path);
  const Image out = resample_bilinear(image, scale);
  write_ppm(out, out_path);
  std::cout << image.width << "x" << image.height << " -> " << out.width << "x"
            << out.height << "\n";
  return 0;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::io_failure:
      return 3;
    case Errc::diverged:
      return 4;
    default:
      return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"many-small-objects detector: synthesis, training, inference, evaluation"};
  app.require_subcommand(1);

  std::string spec_path, data_dir, config_path, weights_path, image_path;
  std::string det_path, truth_path, out_path, raster_path;
  std::uint64_t seed = 0;
  std::int64_t seed_override = -1;
  int count = 1;
  double threshold = -1, merge_radius = -1, radius = 8.0, scale = 1.0;
  bool fold = false;

  auto* synth = app.add_subcommand("synth", "generate synthetic scenes with truth");
  synth->add_option("--spec", spec_path, "scene config file");
  synth->add_option("--seed", seed, "base seed");
  synth->add_option("--out", out_path, "output directory")->required();
  synth->add_option("--count", count, "number of scenes");

  auto* train = app.add_subcommand("train", "train on a directory of scenes");
  train->add_option("--data", data_dir, "directory of scene_*.ppm/.truth pairs")->required();
  train->add_option("--config", config_path, "config file");
  train->add_option("--out", out_path, "weights output path")->required();
  train->add_option("--seed", seed_override, "override train.seed");

  auto* infer = app.add_subcommand("infer", "run the detector over an image");
  infer->add_option("--weights", weights_path, "weights file")->required();
  infer->add_option("--image", image_path, "input PPM image")->required();
  infer->add_option("--out", out_path, "detections output file")->required();
  infer->add_option("--threshold", threshold, "existence threshold");
  infer->add_option("--merge-radius", merge_radius, "duplicate merge radius (px)");
  infer->add_option("--config", config_path, "config file");

  auto* eval = app.add_subcommand("eval", "score detections against truth");
  eval->add_option("--detections", det_path, "detections file")->required();
  eval->add_option("--truth", truth_path, "truth file")->required();
  eval->add_option("--radius", radius, "match radius (px)");
  eval->add_flag("--fold-orientation", fold, "treat heading as axis (mod 180)");
  eval->add_option("--out", out_path, "also write the report here");

  auto* render = app.add_subcommand("render", "export detection overlay plot data");
  render->add_option("--image", image_path, "input PPM image");
  render->add_option("--detections", det_path, "detections file")->required();
  render->add_option("--out", out_path, "overlay output file")->required();
  render->add_option("--raster", raster_path, "also rasterize onto a PPM copy");

  auto* resample = app.add_subcommand("resample", "bilinear rescale (GSD adjustment)");
  resample->add_option("--image", image_path, "input PPM image")->required();
  resample->add_option("--scale", scale, "scale factor")->required();
  resample->add_option("--out", out_path, "output PPM")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) return cmd_synth(spec_path, seed, out_path, count);
    if (*train) return cmd_train(data_dir, config_path, out_path, seed_override);
    if (*infer)
      return cmd_infer(weights_path, image_path, out_path, config_path, threshold,
                       merge_radius);
    if (*eval) return cmd_eval(det_path, truth_path, radius, fold, out_path);
    if (*render) return cmd_render(image_path, det_path, out_path, raster_path);
    if (*resample) return cmd_resample(image_path, scale, out_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
