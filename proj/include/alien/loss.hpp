#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "alien/codec.hpp"
#include "alien/error.hpp"

namespace alien {

// Relative weight per feature index. lambda[0] scales the existence term and
// must stay positive; training quality is robust to the others within an
// order of magnitude or two, so all-ones is the default.
struct LossWeights {
  std::array<double, kFeaturesPerAnchor> lambda;

  static LossWeights ones() {
    LossWeights w;
    w.lambda.fill(1.0);
    return w;
  }

  void validate() const {
    if (!(lambda[0] > 0)) fail(Errc::bad_config, "lambda[0] (existence) must be > 0");
    for (double l : lambda)
      if (!(l >= 0)) fail(Errc::bad_config, "loss weights must be >= 0");
  }
};

struct LossBreakdown {
  double total = 0;
  std::array<double, kFeaturesPerAnchor> per_feature{};
  std::vector<double> per_anchor_existence;
};

inline constexpr double kBceClamp = 1e-7;

namespace detail {
template <typename T>
inline double clamp_unit(T p) {
  double v = static_cast<double>(p);
  if (v < kBceClamp) v = kBceClamp;
  if (v > 1.0 - kBceClamp) v = 1.0 - kBceClamp;
  return v;
}
}  // namespace detail

// Masked multi-feature loss over one cell's prediction vector.
//
// The existence feature (m = 0) contributes binary cross-entropy at every
// anchor: non-target anchors matter as much as target anchors there. Every
// regression feature (m >= 1) contributes squared error only at anchors
// whose truth mask is set. Masked terms are skipped by selection, not
// multiplied by zero, so their truth slots are never read -- they may hold
// any placeholder (even NaN) without contaminating the total.
//
// Squared error is summed, not averaged, per anchor-channel; lambda absorbs
// any normalization.
template <typename T>
LossBreakdown eval_loss(std::span<const T> pred, const TruthVector& truth,
                        const LossWeights& weights) {
  const int n_anchors = truth.anchor_count();
  const int m = truth.features_per_anchor();
  if (pred.size() != truth.values.size())
    fail(Errc::shape_mismatch, "prediction/truth length mismatch");

  LossBreakdown out;
  out.per_anchor_existence.resize(n_anchors);
  double raw_bce = 0.0;
  std::array<double, kFeaturesPerAnchor> raw_sq{};
  for (int n = 0; n < n_anchors; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * m;
    const double p0 = detail::clamp_unit(pred[base]);
    const double bce = truth.mask[n] ? -std::log(p0) : -std::log(1.0 - p0);
    out.per_anchor_existence[n] = weights.lambda[0] * bce;
    raw_bce += bce;
    if (!truth.mask[n]) continue;
    for (int f = 1; f < m; ++f) {
      const double diff =
          truth.values[base + f] - detail::clamp_unit(pred[base + f]);
      raw_sq[f] += diff * diff;
    }
  }
  out.per_feature[0] = weights.lambda[0] * raw_bce;
  for (int f = 1; f < m; ++f) out.per_feature[f] = weights.lambda[f] * raw_sq[f];
  double total = 0.0;
  for (int f = 0; f < m; ++f) total += out.per_feature[f];
  out.total = total;
  return out;
}

// Gradient of eval_loss with respect to the prediction vector. Masked
// feature slots are exactly zero.
template <typename T>
std::vector<T> loss_gradient(std::span<const T> pred, const TruthVector& truth,
                             const LossWeights& weights) {
  const int n_anchors = truth.anchor_count();
  const int m = truth.features_per_anchor();
  if (pred.size() != truth.values.size())
    fail(Errc::shape_mismatch, "prediction/truth length mismatch");

  std::vector<T> grad(pred.size(), T(0));
  for (int n = 0; n < n_anchors; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * m;
    const double p0 = detail::clamp_unit(pred[base]);
    const double dbce = truth.mask[n] ? -1.0 / p0 : 1.0 / (1.0 - p0);
    grad[base] = static_cast<T>(weights.lambda[0] * dbce);
    if (!truth.mask[n]) continue;
    for (int f = 1; f < m; ++f) {
      const double p = detail::clamp_unit(pred[base + f]);
      grad[base + f] =
          static_cast<T>(2.0 * weights.lambda[f] * (p - truth.values[base + f]));
    }
  }
  return grad;
}

}  // namespace alien
