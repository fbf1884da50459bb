// Minimal end-to-end walk through the library API: synthesize a scene,
// sample labeled chips, train briefly, run sliding inference on a held-out
// scene and score the result. Runs in about a minute; the CLI exposes the
// same pipeline at full scale.

#include <iostream>

#include "alien/alien.hpp"

using namespace alien;

int main() {
  const AnchorLayout layout = build_layout();

  SceneSpec spec;
  spec.width = 256;
  spec.height = 256;
  spec.target_count = 30;
  spec.min_separation = 24;

  const Scene train_scene = generate_scene(spec, /*seed=*/1);
  const Scene test_scene = generate_scene(spec, /*seed=*/2);
  std::cout << "scenes: " << train_scene.truth.targets.size() << " train targets, "
            << test_scene.truth.targets.size() << " holdout targets\n";

  ChipPolicy policy;
  policy.count = 300;
  const auto dataset =
      sample_chips(train_scene.image, train_scene.truth, layout, policy, 3);

  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 16;
  cfg.seed = 4;
  const TrainResult result = train(dataset, cfg);
  for (std::size_t e = 0; e < result.history.epochs.size(); ++e)
    std::cout << "epoch " << (e + 1) << ": loss "
              << result.history.epochs[e].mean_loss << "\n";

  InferenceConfig infer_cfg;
  const auto detections =
      infer_image(result.model, test_scene.image, layout, infer_cfg);
  const Matching matching =
      match_detections(detections, test_scene.truth.targets, 8.0);
  const EvalReport report =
      compute_metrics(matching, detections, test_scene.truth.targets);
  std::cout << format_report(report);
  return 0;
}
