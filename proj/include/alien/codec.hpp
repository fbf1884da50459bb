#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "alien/error.hpp"
#include "alien/geometry.hpp"

namespace alien {

inline constexpr double kPi = 3.14159265358979323846;

enum class FeatureKind { categorical, regression };

struct FeatureDesc {
  std::string name;
  FeatureKind kind;
};

// The per-anchor inference block. Index 0 is the existence probability
// (binary cross-entropy); indices 1..8 are regressed features (squared
// error, masked out wherever no target exists).
struct FeatureSpec {
  std::vector<FeatureDesc> features;

  static FeatureSpec standard() {
    return {{{"existence", FeatureKind::categorical},
             {"dx", FeatureKind::regression},
             {"dy", FeatureKind::regression},
             {"hue_sin", FeatureKind::regression},
             {"hue_cos", FeatureKind::regression},
             {"saturation", FeatureKind::regression},
             {"value", FeatureKind::regression},
             {"ori_sin", FeatureKind::regression},
             {"ori_cos", FeatureKind::regression}}};
  }

  int count() const { return static_cast<int>(features.size()); }
};

// Number of values per anchor block with the standard feature set.
inline constexpr int kFeaturesPerAnchor = 9;

// Encoded per-cell truth. values is anchor-major: anchor n occupies
// [n*M, (n+1)*M). mask[n] records whether a target is bound to anchor n;
// feature entries of unbound anchors hold the neutral placeholder 0.5 and
// are never read by the loss.
struct TruthVector {
  std::vector<double> values;
  std::vector<std::uint8_t> mask;

  int anchor_count() const { return static_cast<int>(mask.size()); }
  int features_per_anchor() const {
    return mask.empty() ? 0 : static_cast<int>(values.size() / mask.size());
  }
};

// One decoded network output above threshold, mapped back to global
// coordinates.
struct Detection {
  double x = 0;
  double y = 0;
  double confidence = 0;
  double hue = 0;
  double saturation = 0;
  double value = 0;
  double orientation = 0;
  CellOrigin cell;
  int anchor_index = 0;
};

// Affine map [-radius, radius] -> [0, 1], clamped. Clamping absorbs the rare
// case where greedy assignment displaces a target beyond the radius.
inline double encode_offset(double delta, double radius) {
  const double u = (delta + radius) / (2.0 * radius);
  return u < 0.0 ? 0.0 : (u > 1.0 ? 1.0 : u);
}

inline double decode_offset(double u, double radius) {
  return 2.0 * radius * u - radius;
}

// Angle in degrees -> sine/cosine pair remapped into [0, 1] so a sigmoid
// output layer can express it.
inline std::pair<double, double> encode_angle(double theta_deg) {
  const double rad = theta_deg * (kPi / 180.0);
  return {(std::sin(rad) + 1.0) / 2.0, (std::cos(rad) + 1.0) / 2.0};
}

// Inverse of encode_angle, result in [0, 360). The degenerate midpoint
// (u = v = 0.5) decodes to 0 by convention.
inline double decode_angle(double u, double v) {
  const double s = 2.0 * u - 1.0;
  const double c = 2.0 * v - 1.0;
  if (s == 0.0 && c == 0.0) return 0.0;
  double deg = std::atan2(s, c) * (180.0 / kPi);
  if (deg < 0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

inline TruthVector encode_cell_truth(const Assignment& assignment,
                                     const AnchorLayout& layout,
                                     const FeatureSpec& spec) {
  const int n_anchors = static_cast<int>(assignment.slots.size());
  const int m = spec.count();
  TruthVector out;
  out.values.assign(static_cast<std::size_t>(n_anchors) * m, 0.5);
  out.mask.assign(n_anchors, 0);
  for (int n = 0; n < n_anchors; ++n) {
    double* block = out.values.data() + static_cast<std::size_t>(n) * m;
    if (!assignment.slots[n]) {
      block[0] = 0.0;
      continue;
    }
    const AssignedSlot& slot = *assignment.slots[n];
    out.mask[n] = 1;
    block[0] = 1.0;
    block[1] = encode_offset(slot.dx, layout.offset_radius);
    block[2] = encode_offset(slot.dy, layout.offset_radius);
    const auto [hs, hc] = encode_angle(slot.target.hue);
    block[3] = hs;
    block[4] = hc;
    block[5] = slot.target.saturation;
    block[6] = slot.target.value;
    const auto [os, oc] = encode_angle(slot.target.orientation);
    block[7] = os;
    block[8] = oc;
  }
  return out;
}

// Decodes the anchors whose existence score exceeds threshold back to global
// positions and attributes.
template <typename T>
std::vector<Detection> decode_detections(std::span<const T> pred,
                                         const AnchorLayout& layout,
                                         const CellOrigin& origin,
                                         double threshold,
                                         const FeatureSpec& spec) {
  const int m = spec.count();
  const int n_anchors = layout.anchor_count();
  if (pred.size() != static_cast<std::size_t>(n_anchors) * m)
    fail(Errc::shape_mismatch, "prediction vector length mismatch");
  std::vector<Detection> out;
  for (int n = 0; n < n_anchors; ++n) {
    const T* block = pred.data() + static_cast<std::size_t>(n) * m;
    if (!(static_cast<double>(block[0]) > threshold)) continue;
    Detection d;
    d.confidence = static_cast<double>(block[0]);
    d.x = origin.x0 + layout.anchors[n].x +
          decode_offset(static_cast<double>(block[1]), layout.offset_radius);
    d.y = origin.y0 + layout.anchors[n].y +
          decode_offset(static_cast<double>(block[2]), layout.offset_radius);
    d.hue = decode_angle(static_cast<double>(block[3]), static_cast<double>(block[4]));
    d.saturation = static_cast<double>(block[5]);
    d.value = static_cast<double>(block[6]);
    d.orientation =
        decode_angle(static_cast<double>(block[7]), static_cast<double>(block[8]));
    d.cell = origin;
    d.anchor_index = n;
    out.push_back(d);
  }
  return out;
}

}  // namespace alien
