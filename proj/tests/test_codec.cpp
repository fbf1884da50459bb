#include <gtest/gtest.h>

#include <cmath>

#include "alien/codec.hpp"
#include "alien/rng.hpp"

using namespace alien;

namespace {

TargetTruth make_target(double x, double y, double hue, double sat, double val,
                        double ori) {
  TargetTruth t;
  t.x = x;
  t.y = y;
  t.hue = hue;
  t.saturation = sat;
  t.value = val;
  t.orientation = ori;
  return t;
}

}  // namespace

TEST(OffsetCodec, KnownPoints) {
  EXPECT_DOUBLE_EQ(encode_offset(0, 16), 0.5);
  EXPECT_DOUBLE_EQ(encode_offset(16, 16), 1.0);
  EXPECT_DOUBLE_EQ(encode_offset(-16, 16), 0.0);
}

TEST(OffsetCodec, ClampLosesOutOfRangePixels) {
  EXPECT_DOUBLE_EQ(encode_offset(20, 16), 1.0);
  // decode of the clamped value returns the radius, 4 px short of the truth
  EXPECT_DOUBLE_EQ(decode_offset(encode_offset(20, 16), 16), 16.0);
  // versus the unclamped affine map, which would round-trip
  const double unclamped = (20.0 + 16.0) / 32.0;
  EXPECT_DOUBLE_EQ(2 * 16 * unclamped - 16, 20.0);
}

TEST(OffsetCodec, RoundTripExactInRange) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double r = rng.uniform(1.0, 64.0);
    const double d = rng.uniform(-r, r);
    EXPECT_NEAR(decode_offset(encode_offset(d, r), r), d, 1e-12 * r);
  }
}

TEST(AngleCodec, KnownPoints) {
  auto [s0, c0] = encode_angle(0);
  EXPECT_NEAR(s0, 0.5, 1e-15);
  EXPECT_NEAR(c0, 1.0, 1e-15);
  auto [s90, c90] = encode_angle(90);
  EXPECT_NEAR(s90, 1.0, 1e-15);
  EXPECT_NEAR(c90, 0.5, 1e-15);
  // 225 degrees: both components (1 - sqrt(2)/2) / 2
  auto [s225, c225] = encode_angle(225);
  EXPECT_NEAR(s225, 0.14644660940672624, 1e-12);
  EXPECT_NEAR(c225, 0.14644660940672624, 1e-12);
}

TEST(AngleCodec, DecodeKnownPoints) {
  EXPECT_NEAR(decode_angle(0.5, 1.0), 0.0, 1e-9);
  EXPECT_NEAR(decode_angle(1.0, 0.5), 90.0, 1e-9);
  EXPECT_DOUBLE_EQ(decode_angle(0.5, 0.5), 0.0);  // degenerate point
}

TEST(AngleCodec, RoundTripWithinMicroDegree) {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const double theta = rng.uniform(0.0, 360.0);
    const auto [u, v] = encode_angle(theta);
    const double back = decode_angle(u, v);
    double diff = std::fabs(back - theta);
    diff = std::min(diff, 360.0 - diff);
    EXPECT_LT(diff, 1e-6);
  }
}

TEST(CellTruth, EmptyAssignment) {
  const AnchorLayout layout = build_layout();
  Assignment a;
  a.slots.resize(5);
  const TruthVector tv = encode_cell_truth(a, layout, FeatureSpec::standard());
  ASSERT_EQ(tv.values.size(), 45u);
  ASSERT_EQ(tv.mask.size(), 5u);
  for (int n = 0; n < 5; ++n) {
    EXPECT_FALSE(tv.mask[n]);
    EXPECT_DOUBLE_EQ(tv.values[9 * n], 0.0);
    for (int f = 1; f < 9; ++f) EXPECT_DOUBLE_EQ(tv.values[9 * n + f], 0.5);
  }
}

TEST(CellTruth, CenterAnchorBlockLayout) {
  const AnchorLayout layout = build_layout();
  // Target exactly on the center anchor: hue 0, sat 1, val 1, heading 90.
  const Assignment a =
      assign_targets({make_target(16, 16, 0, 1, 1, 90)}, {0, 0, 0, 0}, layout);
  const TruthVector tv = encode_cell_truth(a, layout, FeatureSpec::standard());
  const double expected[9] = {1, 0.5, 0.5, 0.5, 1, 1, 1, 1, 0.5};
  for (int f = 0; f < 9; ++f) EXPECT_NEAR(tv.values[18 + f], expected[f], 1e-12);
  EXPECT_TRUE(tv.mask[2]);
  EXPECT_EQ(tv.mask[0] + tv.mask[1] + tv.mask[3] + tv.mask[4], 0);
}

TEST(CellTruth, ValuesAlwaysInUnitRange) {
  const AnchorLayout layout = build_layout();
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TargetTruth> targets;
    const int n = static_cast<int>(rng.below(6));
    for (int i = 0; i < n; ++i)
      targets.push_back(make_target(rng.uniform(0.0, 32.0), rng.uniform(0.0, 32.0),
                                    rng.uniform(0.0, 360.0), rng.uniform(0.0, 1.0),
                                    rng.uniform(0.0, 1.0), rng.uniform(0.0, 360.0)));
    const TruthVector tv = encode_cell_truth(
        assign_targets(targets, {0, 0, 0, 0}, layout), layout, FeatureSpec::standard());
    int masked = 0;
    for (double v : tv.values) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    for (auto m : tv.mask) masked += m;
    EXPECT_EQ(masked, n);
  }
}

TEST(DecodeDetections, ThresholdFiltersAll) {
  const AnchorLayout layout = build_layout();
  std::vector<double> pred(45, 0.1);
  const auto dets = decode_detections<double>(pred, layout, {0, 0, 0, 0}, 0.5,
                                              FeatureSpec::standard());
  EXPECT_TRUE(dets.empty());
}

TEST(DecodeDetections, ZeroOffsetArithmetic) {
  const AnchorLayout layout = build_layout();
  std::vector<double> pred(45, 0.1);
  pred[18] = 0.9;   // center anchor existence
  pred[19] = 0.5;   // dx = 0
  pred[20] = 0.5;   // dy = 0
  const CellOrigin origin{64, 96, 3, 2};
  const auto dets =
      decode_detections<double>(pred, layout, origin, 0.5, FeatureSpec::standard());
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_DOUBLE_EQ(dets[0].x, 80.0);
  EXPECT_DOUBLE_EQ(dets[0].y, 112.0);
  EXPECT_DOUBLE_EQ(dets[0].confidence, 0.9);
  EXPECT_EQ(dets[0].anchor_index, 2);
}

TEST(DecodeDetections, RoundTripRecoversAssignments) {
  const AnchorLayout layout = build_layout();
  const FeatureSpec spec = FeatureSpec::standard();
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const CellOrigin origin{32 * static_cast<int>(rng.below(8)),
                            32 * static_cast<int>(rng.below(8)), 0, 0};
    std::vector<TargetTruth> targets;
    const int n = 1 + static_cast<int>(rng.below(5));
    for (int i = 0; i < n; ++i)
      targets.push_back(make_target(
          origin.x0 + rng.uniform(0.0, 32.0), origin.y0 + rng.uniform(0.0, 32.0),
          rng.uniform(0.0, 360.0), rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0),
          rng.uniform(0.0, 360.0)));
    const Assignment a = assign_targets(targets, origin, layout);
    const TruthVector tv = encode_cell_truth(a, layout, spec);
    const auto dets = decode_detections<double>(tv.values, layout, origin, 0.5, spec);
    ASSERT_EQ(static_cast<int>(dets.size()), a.filled());
    for (const Detection& d : dets) {
      const auto& slot = a.slots[d.anchor_index];
      ASSERT_TRUE(slot.has_value());
      if (std::fabs(slot->dx) <= layout.offset_radius &&
          std::fabs(slot->dy) <= layout.offset_radius) {
        EXPECT_NEAR(d.x, slot->target.x, 1e-9);
        EXPECT_NEAR(d.y, slot->target.y, 1e-9);
      }
      double hue_diff = std::fabs(d.hue - slot->target.hue);
      hue_diff = std::min(hue_diff, 360.0 - hue_diff);
      EXPECT_LT(hue_diff, 1e-6);
      double ori_diff = std::fabs(d.orientation - slot->target.orientation);
      ori_diff = std::min(ori_diff, 360.0 - ori_diff);
      EXPECT_LT(ori_diff, 1e-6);
      EXPECT_NEAR(d.saturation, slot->target.saturation, 1e-12);
      EXPECT_NEAR(d.value, slot->target.value, 1e-12);
      EXPECT_DOUBLE_EQ(d.confidence, 1.0);
    }
  }
}

TEST(DecodeDetections, CountMonotoneInThreshold) {
  const AnchorLayout layout = build_layout();
  Rng rng(41);
  std::vector<double> pred(45);
  for (double& v : pred) v = rng.uniform();
  std::size_t prev = 45;
  for (double thr = 0.05; thr < 1.0; thr += 0.05) {
    const auto dets = decode_detections<double>(pred, layout, {0, 0, 0, 0}, thr,
                                                FeatureSpec::standard());
    EXPECT_LE(dets.size(), prev);
    prev = dets.size();
  }
}
