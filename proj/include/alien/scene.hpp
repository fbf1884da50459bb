#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "alien/codec.hpp"
#include "alien/error.hpp"
#include "alien/geometry.hpp"
#include "alien/image.hpp"
#include "alien/rng.hpp"
#include "alien/tensor.hpp"

namespace alien {

// Capacity assumption baked into the anchor design: no 32x32 window may hold
// more than 5 target centers. Placement enforces this constructively.
inline constexpr int kCapacityWindow = 32;
inline constexpr int kCapacityMax = 5;

struct BackgroundSpec {
  double base_gray = 0.35;       // mean background level, [0, 1]
  double noise_amplitude = 0.08; // uniform texture amplitude
};

struct SceneSpec {
  int width = 512;
  int height = 512;
  int target_count = 0;
  double target_length = 30.0;
  double target_width = 10.0;
  BackgroundSpec background;
  double min_separation = 12.0;
};

struct SceneTruth {
  std::vector<TargetTruth> targets;
  int width = 0;
  int height = 0;
};

struct Scene {
  Image image;
  SceneTruth truth;
};

// One training sample: normalized chip tensor plus the encoded truth of the
// central cell.
struct ChipSample {
  Tensor chip;
  TruthVector truth;
  CellOrigin origin;
};

// Heading convention used everywhere: 0 degrees points along -y (up in image
// coordinates), positive angles turn clockwise.
inline Vec2 heading_direction(double orientation_deg) {
  const double rad = orientation_deg * (kPi / 180.0);
  return {std::sin(rad), -std::cos(rad)};
}

namespace detail {

// Largest number of points any axis-aligned window x window square can
// cover. Candidate corners need only be tested at the points themselves.
inline int max_points_in_window(const std::vector<Vec2>& pts, double window) {
  int best = 0;
  for (const Vec2& ax : pts) {
    std::vector<double> ys;
    for (const Vec2& p : pts)
      if (p.x >= ax.x && p.x < ax.x + window) ys.push_back(p.y);
    std::sort(ys.begin(), ys.end());
    for (std::size_t i = 0; i < ys.size(); ++i) {
      int count = 0;
      for (std::size_t j = i; j < ys.size() && ys[j] < ys[i] + window; ++j) ++count;
      best = std::max(best, count);
    }
  }
  return best;
}

inline bool placement_ok(const std::vector<TargetTruth>& placed, double cx, double cy,
                         double min_separation) {
  std::vector<Vec2> near;
  for (const TargetTruth& t : placed) {
    const double dx = t.x - cx;
    const double dy = t.y - cy;
    if (dx * dx + dy * dy < min_separation * min_separation) return false;
    if (std::fabs(dx) < kCapacityWindow && std::fabs(dy) < kCapacityWindow)
      near.push_back({t.x, t.y});
  }
  near.push_back({cx, cy});
  return max_points_in_window(near, kCapacityWindow) <= kCapacityMax;
}

struct TargetPaint {
  double cx, cy;
  Vec2 dir;   // heading
  Vec2 perp;  // right-hand normal
  double half_len, half_wid;
  Rgb body;
  Rgb band;  // lighter front-third band, makes heading identifiable
};

inline TargetPaint make_paint(const TargetTruth& t, const SceneSpec& spec) {
  TargetPaint p;
  p.cx = t.x;
  p.cy = t.y;
  p.dir = heading_direction(t.orientation);
  p.perp = {-p.dir.y, p.dir.x};
  p.half_len = spec.target_length / 2.0;
  p.half_wid = spec.target_width / 2.0;
  p.body = hsv_to_rgb(t.hue, t.saturation, t.value);
  p.band = hsv_to_rgb(t.hue, t.saturation * 0.55,
                      std::min(1.0, t.value + 0.45));
  return p;
}

}  // namespace detail

// Renders a textured background plus oriented rectangular targets
// (target_length x target_width, about the size of a car seen from above).
// Centers are uniform, rejection-sampled against min_separation and the
// per-window capacity limit. Truth records the exact center, HSV color and
// heading of every target. Deterministic per (spec, seed).
inline Scene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  if (spec.width <= 0 || spec.height <= 0)
    fail(Errc::invalid_geometry, "scene dimensions must be positive");
  if (spec.target_count < 0)
    fail(Errc::bad_config, "target_count must be non-negative");

  Scene scene;
  scene.truth.width = spec.width;
  scene.truth.height = spec.height;

  Rng place_rng(mix_seed(seed, 0x5CE0));
  for (int t = 0; t < spec.target_count; ++t) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const double cx = place_rng.uniform(0.0, spec.width);
      const double cy = place_rng.uniform(0.0, spec.height);
      if (!detail::placement_ok(scene.truth.targets, cx, cy, spec.min_separation))
        continue;
      TargetTruth truth;
      truth.x = cx;
      truth.y = cy;
      truth.hue = place_rng.uniform(0.0, 360.0);
      truth.saturation = place_rng.uniform(0.5, 1.0);
      truth.value = place_rng.uniform(0.5, 1.0);
      truth.orientation = place_rng.uniform(0.0, 360.0);
      scene.truth.targets.push_back(truth);
      placed = true;
      break;
    }
    if (!placed)
      fail(Errc::placement_failure,
           "could not place target " + std::to_string(t + 1) + " of " +
               std::to_string(spec.target_count));
  }

  // Background texture.
  Rng bg_rng(mix_seed(seed, 0xB6));
  Image& img = scene.image;
  img.width = spec.width;
  img.height = spec.height;
  img.data.resize(static_cast<std::size_t>(spec.width) * spec.height * 3);
  const double base = spec.background.base_gray;
  const double amp = spec.background.noise_amplitude;
  for (int i = 0; i < spec.height; ++i) {
    for (int j = 0; j < spec.width; ++j) {
      const double lum = base + bg_rng.uniform(-amp, amp);
      std::uint8_t* px = img.pixel(i, j);
      for (int ch = 0; ch < 3; ++ch)
        px[ch] = quantize8(lum + bg_rng.uniform(-amp, amp) * 0.25);
    }
  }

  // Paint targets over the background. Target pixels carry the pure HSV
  // color (no noise) so the recorded hue survives 8-bit quantization.
  for (const TargetTruth& t : scene.truth.targets) {
    const detail::TargetPaint p = detail::make_paint(t, spec);
    const double reach = p.half_len + 1.0;
    const int jx0 = std::max(0, static_cast<int>(std::floor(p.cx - reach)));
    const int jx1 = std::min(spec.width - 1, static_cast<int>(std::ceil(p.cx + reach)));
    const int iy0 = std::max(0, static_cast<int>(std::floor(p.cy - reach)));
    const int iy1 = std::min(spec.height - 1, static_cast<int>(std::ceil(p.cy + reach)));
    for (int i = iy0; i <= iy1; ++i) {
      for (int j = jx0; j <= jx1; ++j) {
        const double rx = j - p.cx;
        const double ry = i - p.cy;
        const double u = rx * p.dir.x + ry * p.dir.y;    // along heading
        const double v = rx * p.perp.x + ry * p.perp.y;  // across
        if (std::fabs(u) > p.half_len || std::fabs(v) > p.half_wid) continue;
        const Rgb& c = (u > p.half_len / 3.0) ? p.band : p.body;
        std::uint8_t* px = img.pixel(i, j);
        px[0] = quantize8(c.r);
        px[1] = quantize8(c.g);
        px[2] = quantize8(c.b);
      }
    }
  }
  return scene;
}

struct ChipPolicy {
  int count = 0;
  double positive_fraction = 0.5;
  bool jitter = true;  // free cell origins; false snaps to the stride grid
};

namespace detail {

inline Tensor chip_to_tensor(const Image& chip) {
  Tensor t = Tensor::zeros(chip.height, chip.width, 3);
  for (std::size_t i = 0; i < chip.data.size(); ++i)
    t.values[i] = static_cast<float>(chip.data[i]) * (1.0f / 255.0f);
  return t;
}

inline ChipSample label_cell(const Image& image, const SceneTruth& truth,
                             const AnchorLayout& layout, const CellOrigin& origin,
                             const FeatureSpec& spec) {
  ChipSample s;
  s.origin = origin;
  const auto inside = targets_in_cell(truth.targets, origin, layout);
  s.truth = encode_cell_truth(assign_targets(inside, origin, layout), layout, spec);
  s.chip = chip_to_tensor(extract_chip(image, origin, layout));
  return s;
}

}  // namespace detail

// Draws labeled chips from a scene, balancing cells that contain at least
// one target against empty cells at positive_fraction.
inline std::vector<ChipSample> sample_chips(const Image& image, const SceneTruth& truth,
                                            const AnchorLayout& layout,
                                            const ChipPolicy& policy,
                                            std::uint64_t seed) {
  if (image.width < layout.chip_size || image.height < layout.chip_size)
    fail(Errc::invalid_geometry, "scene smaller than a chip");
  if (policy.positive_fraction < 0 || policy.positive_fraction > 1)
    fail(Errc::bad_config, "positive_fraction must be in [0, 1]");

  const FeatureSpec feats = FeatureSpec::standard();
  const int cell = layout.cell_size;
  const int want_pos = static_cast<int>(std::lround(policy.count * policy.positive_fraction));
  const int want_neg = policy.count - want_pos;

  Rng rng(mix_seed(seed, 0xC419));
  std::vector<ChipSample> samples;
  samples.reserve(policy.count);

  auto snap = [&](int v) { return (v / cell) * cell; };

  int made_pos = 0;
  std::size_t attempts = 0;
  const std::size_t attempt_cap = 10000 + 200ull * policy.count;
  while (made_pos < want_pos) {
    if (truth.targets.empty() || ++attempts > attempt_cap)
      fail(Errc::placement_failure, "cannot draw enough positive chips");
    const TargetTruth& t = truth.targets[rng.below(truth.targets.size())];
    CellOrigin origin;
    if (policy.jitter) {
      origin.x0 = static_cast<int>(std::floor(t.x)) - static_cast<int>(rng.below(cell));
      origin.y0 = static_cast<int>(std::floor(t.y)) - static_cast<int>(rng.below(cell));
    } else {
      origin.x0 = snap(static_cast<int>(t.x));
      origin.y0 = snap(static_cast<int>(t.y));
    }
    origin.col = origin.x0 >= 0 ? origin.x0 / cell : -1;
    origin.row = origin.y0 >= 0 ? origin.y0 / cell : -1;
    const auto inside = targets_in_cell(truth.targets, origin, layout);
    if (inside.empty() || inside.size() > static_cast<std::size_t>(layout.anchor_count()))
      continue;
    samples.push_back(detail::label_cell(image, truth, layout, origin, feats));
    ++made_pos;
  }

  int made_neg = 0;
  attempts = 0;
  while (made_neg < want_neg) {
    if (++attempts > attempt_cap)
      fail(Errc::placement_failure, "cannot draw enough negative chips");
    CellOrigin origin;
    const int max_x = std::max(1, image.width - cell);
    const int max_y = std::max(1, image.height - cell);
    origin.x0 = static_cast<int>(rng.below(max_x));
    origin.y0 = static_cast<int>(rng.below(max_y));
    if (!policy.jitter) {
      origin.x0 = snap(origin.x0);
      origin.y0 = snap(origin.y0);
    }
    origin.col = origin.x0 / cell;
    origin.row = origin.y0 / cell;
    if (!targets_in_cell(truth.targets, origin, layout).empty()) continue;
    samples.push_back(detail::label_cell(image, truth, layout, origin, feats));
    ++made_neg;
  }

  rng.shuffle(samples.begin(), samples.end());
  return samples;
}

// COWC-style ingestion: every nonzero mask pixel marks one target center.
// Adjacent hot pixels stay distinct targets; appearance attributes are
// unavailable and evaluation skips the attribute metrics.
inline SceneTruth ingest_hotpixel_annotations(const Image& image, const GrayImage& mask) {
  if (image.width != mask.width || image.height != mask.height)
    fail(Errc::dimension_mismatch, "image and annotation mask dimensions differ");
  SceneTruth truth;
  truth.width = image.width;
  truth.height = image.height;
  for (int i = 0; i < mask.height; ++i)
    for (int j = 0; j < mask.width; ++j)
      if (mask.at(i, j) > 0)
        truth.targets.push_back(TargetTruth::position_only(j, i));
  return truth;
}

}  // namespace alien
