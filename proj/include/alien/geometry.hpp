#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "alien/error.hpp"
#include "alien/image.hpp"

namespace alien {

struct Vec2 {
  double x = 0;
  double y = 0;
};

// Cell/chip geometry plus the ordered anchor-point pattern. Anchors are
// cell-local pixel coordinates; offset_radius is the half-range used to
// normalize anchor-to-target offsets.
struct AnchorLayout {
  int cell_size = 32;
  int chip_size = 80;
  std::vector<Vec2> anchors;
  double offset_radius = 16.0;

  int anchor_count() const { return static_cast<int>(anchors.size()); }
  int border() const { return (chip_size - cell_size) / 2; }
};

// One labeled object. Coordinates are global scene pixels; hue and
// orientation are degrees in [0, 360). Hot-pixel ingestion produces targets
// whose appearance attributes are unknown (NaN, has_attributes() false).
struct TargetTruth {
  double x = 0;
  double y = 0;
  double hue = 0;
  double saturation = 0;
  double value = 0;
  double orientation = 0;

  bool has_attributes() const { return !std::isnan(hue); }

  static TargetTruth position_only(double x, double y) {
    TargetTruth t;
    t.x = x;
    t.y = y;
    t.hue = t.saturation = t.value = t.orientation =
        std::numeric_limits<double>::quiet_NaN();
    return t;
  }
};

// Top-left corner of a cell on the stride-aligned grid.
struct CellOrigin {
  int x0 = 0;
  int y0 = 0;
  int row = 0;
  int col = 0;
};

struct AssignedSlot {
  TargetTruth target;
  double dx = 0;  // target minus anchor, global pixels
  double dy = 0;
};

// Per-cell anchor bindings. slots[n] corresponds to layout.anchors[n].
struct Assignment {
  std::vector<std::optional<AssignedSlot>> slots;

  int filled() const {
    int n = 0;
    for (const auto& s : slots)
      if (s) ++n;
    return n;
  }
};

// Quincunx layout: the four quarter points plus the center, ordered
// [top-left, top-right, center, bottom-left, bottom-right].
inline AnchorLayout build_layout(int cell_size = 32, int chip_size = 80) {
  if (cell_size <= 0)
    fail(Errc::invalid_geometry, "cell_size must be positive");
  if (chip_size < cell_size)
    fail(Errc::invalid_geometry, "chip_size must be >= cell_size");
  if ((chip_size - cell_size) % 2 != 0)
    fail(Errc::invalid_geometry, "chip border must be symmetric (even difference)");
  AnchorLayout layout;
  layout.cell_size = cell_size;
  layout.chip_size = chip_size;
  const double q = cell_size / 4.0;
  const double h = cell_size / 2.0;
  layout.anchors = {{q, q}, {3 * q, q}, {h, h}, {q, 3 * q}, {3 * q, 3 * q}};
  layout.offset_radius = h;
  return layout;
}

// Row-major cell origins tiling an image with stride = cell_size. Ragged
// right/bottom cells are included; chip extraction pads them.
inline std::vector<CellOrigin> cells_covering(int width, int height,
                                              const AnchorLayout& layout) {
  if (width <= 0 || height <= 0)
    fail(Errc::invalid_geometry, "image dimensions must be positive");
  const int cell = layout.cell_size;
  const int cols = (width + cell - 1) / cell;
  const int rows = (height + cell - 1) / cell;
  std::vector<CellOrigin> origins;
  origins.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      origins.push_back({c * cell, r * cell, r, c});
  return origins;
}

// Half-open membership: a target on a shared edge belongs to exactly one cell.
inline std::vector<TargetTruth> targets_in_cell(const std::vector<TargetTruth>& truth,
                                                const CellOrigin& origin,
                                                const AnchorLayout& layout) {
  std::vector<TargetTruth> inside;
  const double x1 = origin.x0 + layout.cell_size;
  const double y1 = origin.y0 + layout.cell_size;
  for (const TargetTruth& t : truth) {
    if (t.x >= origin.x0 && t.x < x1 && t.y >= origin.y0 && t.y < y1)
      inside.push_back(t);
  }
  if (inside.size() > static_cast<std::size_t>(layout.anchor_count()))
    fail(Errc::too_many_targets,
         "cell holds " + std::to_string(inside.size()) + " targets but only " +
             std::to_string(layout.anchor_count()) + " anchor-points");
  return inside;
}

// Greedy global-nearest assignment: among all (unassigned target, unassigned
// anchor) pairs pick the closest, bind it, repeat. Ties break toward the
// lower anchor index, then the earlier target list position, so training
// data is reproducible.
inline Assignment assign_targets(const std::vector<TargetTruth>& targets,
                                 const CellOrigin& origin,
                                 const AnchorLayout& layout) {
  const int n_anchors = layout.anchor_count();
  if (targets.size() > static_cast<std::size_t>(n_anchors))
    fail(Errc::capacity_exceeded, "more targets than anchor-points");

  struct Pair {
    double d2;
    int anchor;
    int pos;
  };
  std::vector<Pair> pairs;
  pairs.reserve(targets.size() * n_anchors);
  for (int a = 0; a < n_anchors; ++a) {
    const double ax = origin.x0 + layout.anchors[a].x;
    const double ay = origin.y0 + layout.anchors[a].y;
    for (int p = 0; p < static_cast<int>(targets.size()); ++p) {
      const double dx = targets[p].x - ax;
      const double dy = targets[p].y - ay;
      pairs.push_back({dx * dx + dy * dy, a, p});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& l, const Pair& r) {
    if (l.d2 != r.d2) return l.d2 < r.d2;
    if (l.anchor != r.anchor) return l.anchor < r.anchor;
    return l.pos < r.pos;
  });

  Assignment out;
  out.slots.resize(n_anchors);
  std::vector<bool> anchor_used(n_anchors, false);
  std::vector<bool> target_used(targets.size(), false);
  for (const Pair& pr : pairs) {
    if (anchor_used[pr.anchor] || target_used[pr.pos]) continue;
    anchor_used[pr.anchor] = true;
    target_used[pr.pos] = true;
    const double ax = origin.x0 + layout.anchors[pr.anchor].x;
    const double ay = origin.y0 + layout.anchors[pr.anchor].y;
    out.slots[pr.anchor] =
        AssignedSlot{targets[pr.pos], targets[pr.pos].x - ax, targets[pr.pos].y - ay};
  }
  return out;
}

// Folds an index into [0, n) by mirror reflection at the borders
// (edge-inclusive: -1 -> 0, n -> n-1). Repeats for borders wider than the
// image.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// The chip centered on a cell: the cell plus a (chip-cell)/2 context border
// on every side. Pixels outside the image are reflect-padded, matching the
// padding used by sliding inference.
inline Image extract_chip(const Image& image, const CellOrigin& origin,
                          const AnchorLayout& layout) {
  if (image.empty()) fail(Errc::invalid_geometry, "cannot chip an empty image");
  const int size = layout.chip_size;
  const int b = layout.border();
  Image chip;
  chip.width = size;
  chip.height = size;
  chip.data.resize(static_cast<std::size_t>(size) * size * 3);
  for (int i = 0; i < size; ++i) {
    const int src_i = reflect_index(origin.y0 - b + i, image.height);
    for (int j = 0; j < size; ++j) {
      const int src_j = reflect_index(origin.x0 - b + j, image.width);
      const std::uint8_t* src = image.pixel(src_i, src_j);
      std::uint8_t* dst = chip.pixel(i, j);
      dst[0] = src[0];
      dst[1] = src[1];
      dst[2] = src[2];
    }
  }
  return chip;
}

}  // namespace alien
