#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "alien/codec.hpp"
#include "alien/error.hpp"
#include "alien/geometry.hpp"

namespace alien {

struct MatchPair {
  int detection = 0;
  int truth = 0;
  double distance = 0;
};

// One-to-one detection/truth pairing under a distance cap.
struct Matching {
  std::vector<MatchPair> pairs;
  std::vector<int> unmatched_detections;
  std::vector<int> unmatched_truth;
  double match_radius = 0;
};

// min(|a-b|, period - |a-b|) with angles taken mod period.
inline double circular_diff_deg(double a, double b, double period = 360.0) {
  double d = std::fmod(std::fabs(a - b), period);
  return std::min(d, period - d);
}

// Greedy global-nearest matching: repeatedly bind the closest remaining
// (detection, truth) pair within match_radius. Ties break on indices, so
// the result is deterministic.
inline Matching match_detections(const std::vector<Detection>& detections,
                                 const std::vector<TargetTruth>& truth,
                                 double match_radius = 8.0) {
  if (!(match_radius > 0)) fail(Errc::bad_config, "match_radius must be > 0");

  struct Candidate {
    double d2;
    int det;
    int tru;
  };
  std::vector<Candidate> cands;
  const double r2 = match_radius * match_radius;
  for (int d = 0; d < static_cast<int>(detections.size()); ++d) {
    for (int t = 0; t < static_cast<int>(truth.size()); ++t) {
      const double dx = detections[d].x - truth[t].x;
      const double dy = detections[d].y - truth[t].y;
      const double d2 = dx * dx + dy * dy;
      if (d2 <= r2) cands.push_back({d2, d, t});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.det != b.det) return a.det < b.det;
    return a.tru < b.tru;
  });

  Matching m;
  m.match_radius = match_radius;
  std::vector<bool> det_used(detections.size(), false);
  std::vector<bool> tru_used(truth.size(), false);
  for (const Candidate& c : cands) {
    if (det_used[c.det] || tru_used[c.tru]) continue;
    det_used[c.det] = true;
    tru_used[c.tru] = true;
    m.pairs.push_back({c.det, c.tru, std::sqrt(c.d2)});
  }
  for (int d = 0; d < static_cast<int>(detections.size()); ++d)
    if (!det_used[d]) m.unmatched_detections.push_back(d);
  for (int t = 0; t < static_cast<int>(truth.size()); ++t)
    if (!tru_used[t]) m.unmatched_truth.push_back(t);
  return m;
}

// 2*tp / (2*tp + fp + fn).
inline double f1(long tp, long fp, long fn) {
  if (tp + fp + fn == 0)
    fail(Errc::undefined_metric, "f1 undefined when all counts are zero");
  return 2.0 * tp / (2.0 * tp + fp + fn);
}

struct EvalReport {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  double true_detection_rate = 0;
  double false_alarm_rate = 0;  // truth-relative: fp / (tp + fn)
  double precision = 0;         // detection-relative, reported alongside
  double f1_score = 0;
  double localization_rmse = 0;
  double localization_mse = 0;  // squared-pixel companion value
  double hue_mae = std::numeric_limits<double>::quiet_NaN();
  double orientation_mae = std::numeric_limits<double>::quiet_NaN();
  bool has_attribute_metrics = false;
};

// Metrics over a matching. The false-alarm rate uses the truth count as
// denominator; detection-relative precision is reported as well since both
// conventions are in circulation. Attribute errors are circular and only
// computed over pairs whose truth carries attributes; when none do, the
// attribute metrics are flagged absent. fold_orientation treats heading as
// axis-like (mod 180).
inline EvalReport compute_metrics(const Matching& matching,
                                  const std::vector<Detection>& detections,
                                  const std::vector<TargetTruth>& truth,
                                  bool fold_orientation = false) {
  EvalReport r;
  r.tp = static_cast<long>(matching.pairs.size());
  r.fp = static_cast<long>(matching.unmatched_detections.size());
  r.fn = static_cast<long>(matching.unmatched_truth.size());
  const long truth_count = r.tp + r.fn;
  r.true_detection_rate = truth_count > 0 ? static_cast<double>(r.tp) / truth_count : 0.0;
  r.false_alarm_rate = truth_count > 0 ? static_cast<double>(r.fp) / truth_count : 0.0;
  r.precision = (r.tp + r.fp) > 0 ? static_cast<double>(r.tp) / (r.tp + r.fp) : 0.0;
  r.f1_score = (r.tp + r.fp + r.fn) > 0 ? f1(r.tp, r.fp, r.fn) : 0.0;

  if (!matching.pairs.empty()) {
    double sq = 0;
    for (const MatchPair& p : matching.pairs) sq += p.distance * p.distance;
    r.localization_mse = sq / static_cast<double>(matching.pairs.size());
    r.localization_rmse = std::sqrt(r.localization_mse);
  }

  double hue_sum = 0, ori_sum = 0;
  long attributed = 0;
  for (const MatchPair& p : matching.pairs) {
    const TargetTruth& t = truth[p.truth];
    if (!t.has_attributes()) continue;
    const Detection& d = detections[p.detection];
    hue_sum += circular_diff_deg(d.hue, t.hue);
    ori_sum += fold_orientation
                   ? circular_diff_deg(d.orientation, t.orientation, 180.0)
                   : circular_diff_deg(d.orientation, t.orientation);
    ++attributed;
  }
  if (attributed > 0) {
    r.hue_mae = hue_sum / attributed;
    r.orientation_mae = ori_sum / attributed;
    r.has_attribute_metrics = true;
  }
  return r;
}

}  // namespace alien
