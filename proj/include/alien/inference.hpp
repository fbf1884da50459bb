#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "alien/codec.hpp"
#include "alien/error.hpp"
#include "alien/geometry.hpp"
#include "alien/image.hpp"
#include "alien/model.hpp"
#include "alien/scene.hpp"

namespace alien {

struct InferenceConfig {
  double threshold = 0.5;
  double merge_radius = 8.0;  // 0 disables duplicate merging
  int tile_parallelism = 1;

  void validate() const {
    if (!(threshold > 0 && threshold < 1))
      fail(Errc::bad_config, "threshold must lie in (0, 1)");
    if (merge_radius < 0) fail(Errc::bad_config, "merge_radius must be >= 0");
  }
};

struct PaddedImage {
  Image image;
  int offset_x = 0;  // padded coords minus offset = original coords
  int offset_y = 0;
};

// Reflect-pads an image so the cell grid tiles it exactly and every cell has
// a full chip context border. Inference itself reads tiles through a reflect
// view instead of materializing this copy; the op exists so the padded
// geometry is testable on its own.
inline PaddedImage pad_for_tiling(const Image& image, const AnchorLayout& layout) {
  if (image.empty()) fail(Errc::invalid_geometry, "cannot pad an empty image");
  const int cell = layout.cell_size;
  const int b = layout.border();
  const int grid_w = ((image.width + cell - 1) / cell) * cell;
  const int grid_h = ((image.height + cell - 1) / cell) * cell;
  PaddedImage out;
  out.offset_x = b;
  out.offset_y = b;
  out.image.width = grid_w + 2 * b;
  out.image.height = grid_h + 2 * b;
  out.image.data.resize(static_cast<std::size_t>(out.image.width) * out.image.height * 3);
  for (int i = 0; i < out.image.height; ++i) {
    const int si = reflect_index(i - b, image.height);
    for (int j = 0; j < out.image.width; ++j) {
      const int sj = reflect_index(j - b, image.width);
      const std::uint8_t* src = image.pixel(si, sj);
      std::uint8_t* dst = out.image.pixel(i, j);
      dst[0] = src[0];
      dst[1] = src[1];
      dst[2] = src[2];
    }
  }
  return out;
}

namespace detail {

// Deterministic total order for detection output: scanline position first,
// then confidence (descending), then provenance.
inline bool detection_before(const Detection& a, const Detection& b) {
  if (a.y != b.y) return a.y < b.y;
  if (a.x != b.x) return a.x < b.x;
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.cell.row != b.cell.row) return a.cell.row < b.cell.row;
  if (a.cell.col != b.cell.col) return a.cell.col < b.cell.col;
  return a.anchor_index < b.anchor_index;
}

inline bool confidence_before(const Detection& a, const Detection& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  return detection_before(a, b);
}

}  // namespace detail

// Greedy confidence-descending suppression: a detection survives only if no
// higher-ranked survivor lies strictly within radius. Radius 0 keeps
// everything (order normalized).
inline std::vector<Detection> merge_duplicates(std::vector<Detection> detections,
                                               double radius) {
  if (radius < 0) fail(Errc::bad_config, "merge radius must be >= 0");
  std::sort(detections.begin(), detections.end(), detail::confidence_before);
  std::vector<Detection> kept;
  kept.reserve(detections.size());
  for (const Detection& d : detections) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      const double dx = d.x - k.x;
      const double dy = d.y - k.y;
      if (dx * dx + dy * dy < radius * radius) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  std::sort(kept.begin(), kept.end(), detail::detection_before);
  return kept;
}

// Fully convolutional pass over an image of any size: every cell of the
// stride-aligned grid is evaluated once with its chip context, decoded back
// to global coordinates, then duplicate-merged. Cells are independent
// read-only work items; per-row results are concatenated in grid order, so
// the output does not depend on the worker count.
inline std::vector<Detection> infer_image(const Model& model, const Image& image,
                                          const AnchorLayout& layout,
                                          const InferenceConfig& config) {
  config.validate();
  if (layout.chip_size != model.arch.input.h || layout.chip_size != model.arch.input.w)
    fail(Errc::shape_mismatch, "layout chip size does not match the model input");

  const std::vector<CellOrigin> origins = cells_covering(image.width, image.height, layout);
  const int cols = origins.empty() ? 0 : origins.back().col + 1;
  const int rows = origins.empty() ? 0 : origins.back().row + 1;
  const FeatureSpec feats = FeatureSpec::standard();

  std::vector<std::vector<Detection>> per_row(rows);
  auto run_row = [&](int r) {
    std::vector<Detection>& out = per_row[r];
    for (int c = 0; c < cols; ++c) {
      const CellOrigin& origin = origins[static_cast<std::size_t>(r) * cols + c];
      const Tensor chip = detail::chip_to_tensor(extract_chip(image, origin, layout));
      const Tensor pred = forward_chip(model, chip, RunMode::infer);
      for (Detection& d :
           decode_detections<float>(pred.values, layout, origin, config.threshold, feats)) {
        d.x = std::clamp(d.x, 0.0, static_cast<double>(image.width - 1));
        d.y = std::clamp(d.y, 0.0, static_cast<double>(image.height - 1));
        out.push_back(d);
      }
    }
  };

  const int workers = std::clamp(config.tile_parallelism, 1, std::max(1, rows));
  if (workers <= 1) {
    for (int r = 0; r < rows; ++r) run_row(r);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < rows; r = next.fetch_add(1)) run_row(r);
      });
    for (std::thread& th : pool) th.join();
  }

  std::vector<Detection> all;
  for (const auto& row : per_row) all.insert(all.end(), row.begin(), row.end());
  all = merge_duplicates(std::move(all), config.merge_radius);
  return all;
}

}  // namespace alien
