#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "alien/geometry.hpp"
#include "alien/rng.hpp"

using namespace alien;

namespace {

TargetTruth at(double x, double y) {
  TargetTruth t;
  t.x = x;
  t.y = y;
  return t;
}

// Independent re-run of the greedy global-nearest rule by repeated argmin
// extraction (the implementation scans a pre-sorted pair list instead).
Assignment brute_force_assign(const std::vector<TargetTruth>& targets,
                              const CellOrigin& origin, const AnchorLayout& layout) {
  Assignment out;
  out.slots.resize(layout.anchor_count());
  std::vector<bool> anchor_used(layout.anchor_count(), false);
  std::vector<bool> target_used(targets.size(), false);
  for (std::size_t bound = 0; bound < targets.size(); ++bound) {
    double best = std::numeric_limits<double>::infinity();
    int best_a = -1, best_t = -1;
    for (int a = 0; a < layout.anchor_count(); ++a) {
      if (anchor_used[a]) continue;
      const double ax = origin.x0 + layout.anchors[a].x;
      const double ay = origin.y0 + layout.anchors[a].y;
      for (int t = 0; t < static_cast<int>(targets.size()); ++t) {
        if (target_used[t]) continue;
        const double d = std::hypot(targets[t].x - ax, targets[t].y - ay);
        if (d < best) {
          best = d;
          best_a = a;
          best_t = t;
        }
      }
    }
    anchor_used[best_a] = true;
    target_used[best_t] = true;
    const double ax = origin.x0 + layout.anchors[best_a].x;
    const double ay = origin.y0 + layout.anchors[best_a].y;
    out.slots[best_a] = AssignedSlot{targets[best_t], targets[best_t].x - ax,
                                     targets[best_t].y - ay};
  }
  return out;
}

bool same_bindings(const Assignment& a, const Assignment& b) {
  if (a.slots.size() != b.slots.size()) return false;
  for (std::size_t n = 0; n < a.slots.size(); ++n) {
    if (a.slots[n].has_value() != b.slots[n].has_value()) return false;
    if (!a.slots[n]) continue;
    if (a.slots[n]->target.x != b.slots[n]->target.x ||
        a.slots[n]->target.y != b.slots[n]->target.y)
      return false;
  }
  return true;
}

}  // namespace

TEST(Layout, QuincunxDefault) {
  const AnchorLayout layout = build_layout(32, 80);
  ASSERT_EQ(layout.anchor_count(), 5);
  const std::vector<std::pair<double, double>> expected = {
      {8, 8}, {24, 8}, {16, 16}, {8, 24}, {24, 24}};
  for (int i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(layout.anchors[i].x, expected[i].first);
    EXPECT_DOUBLE_EQ(layout.anchors[i].y, expected[i].second);
  }
  EXPECT_DOUBLE_EQ(layout.offset_radius, 16.0);
  EXPECT_EQ(layout.border(), 24);
}

TEST(Layout, ScalesWithCellSize) {
  const AnchorLayout layout = build_layout(16, 16);
  const std::vector<std::pair<double, double>> expected = {
      {4, 4}, {12, 4}, {8, 8}, {4, 12}, {12, 12}};
  for (int i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(layout.anchors[i].x, expected[i].first);
    EXPECT_DOUBLE_EQ(layout.anchors[i].y, expected[i].second);
  }
}

TEST(Layout, AnchorsInsideCellAndDistinct) {
  const AnchorLayout layout = build_layout();
  std::set<std::pair<double, double>> seen;
  for (const Vec2& a : layout.anchors) {
    EXPECT_GE(a.x, 0);
    EXPECT_LT(a.x, layout.cell_size);
    EXPECT_GE(a.y, 0);
    EXPECT_LT(a.y, layout.cell_size);
    EXPECT_TRUE(seen.insert({a.x, a.y}).second);
  }
}

TEST(Layout, RejectsInvalidGeometry) {
  EXPECT_THROW(build_layout(0, 80), Error);
  EXPECT_THROW(build_layout(32, 16), Error);
  EXPECT_THROW(build_layout(32, 81), Error);
}

TEST(CellsCovering, HoldoutImageCellCount) {
  const AnchorLayout layout = build_layout();
  const auto origins = cells_covering(2048, 2048, layout);
  EXPECT_EQ(origins.size(), 4096u);  // 64 x 64
}

TEST(CellsCovering, SingleAndRaggedCells) {
  const AnchorLayout layout = build_layout();
  const auto one = cells_covering(32, 32, layout);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].x0, 0);
  EXPECT_EQ(one[0].y0, 0);

  const auto two = cells_covering(33, 32, layout);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[1].x0, 32);
  EXPECT_EQ(two[1].col, 1);
}

TEST(CellsCovering, RowMajorOrder) {
  const AnchorLayout layout = build_layout();
  const auto origins = cells_covering(96, 64, layout);
  ASSERT_EQ(origins.size(), 6u);
  EXPECT_EQ(origins[1].x0, 32);
  EXPECT_EQ(origins[1].y0, 0);
  EXPECT_EQ(origins[3].x0, 0);
  EXPECT_EQ(origins[3].y0, 32);
}

TEST(TargetsInCell, EmptyAndHalfOpenBoundary) {
  const AnchorLayout layout = build_layout();
  const CellOrigin origin{0, 0, 0, 0};
  EXPECT_TRUE(targets_in_cell({}, origin, layout).empty());

  // A target on the shared right edge belongs to the next cell.
  const std::vector<TargetTruth> truth = {at(32, 0)};
  EXPECT_TRUE(targets_in_cell(truth, origin, layout).empty());
  EXPECT_EQ(targets_in_cell(truth, {32, 0, 0, 1}, layout).size(), 1u);
}

TEST(TargetsInCell, OvercrowdedCellIsAnError) {
  const AnchorLayout layout = build_layout();
  std::vector<TargetTruth> truth;
  for (int i = 0; i < 6; ++i) truth.push_back(at(2 + 4 * i, 16));
  EXPECT_THROW(targets_in_cell(truth, {0, 0, 0, 0}, layout), Error);
  try {
    targets_in_cell(truth, {0, 0, 0, 0}, layout);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::too_many_targets);
  }
}

TEST(AssignTargets, EmptyInput) {
  const AnchorLayout layout = build_layout();
  const Assignment a = assign_targets({}, {0, 0, 0, 0}, layout);
  EXPECT_EQ(a.filled(), 0);
  EXPECT_EQ(a.slots.size(), 5u);
}

TEST(AssignTargets, CoincidentCenterTarget) {
  const AnchorLayout layout = build_layout();
  const Assignment a = assign_targets({at(16, 16)}, {0, 0, 0, 0}, layout);
  ASSERT_TRUE(a.slots[2].has_value());  // center anchor
  EXPECT_DOUBLE_EQ(a.slots[2]->dx, 0.0);
  EXPECT_DOUBLE_EQ(a.slots[2]->dy, 0.0);
}

TEST(AssignTargets, GreedyDisplacementExample) {
  // (9,9) is sqrt(2) from the top-left anchor and wins it; (8,10) then binds
  // to the center anchor at distance 10 (its nearest remaining anchor).
  const AnchorLayout layout = build_layout();
  const Assignment a = assign_targets({at(9, 9), at(8, 10)}, {0, 0, 0, 0}, layout);
  ASSERT_TRUE(a.slots[0].has_value());
  EXPECT_DOUBLE_EQ(a.slots[0]->target.x, 9);
  EXPECT_DOUBLE_EQ(a.slots[0]->target.y, 9);
  ASSERT_TRUE(a.slots[2].has_value());
  EXPECT_DOUBLE_EQ(a.slots[2]->target.x, 8);
  EXPECT_DOUBLE_EQ(a.slots[2]->target.y, 10);
  EXPECT_DOUBLE_EQ(std::hypot(a.slots[2]->dx, a.slots[2]->dy), 10.0);
  EXPECT_FALSE(a.slots[1].has_value());
  EXPECT_FALSE(a.slots[3].has_value());
  EXPECT_FALSE(a.slots[4].has_value());
}

TEST(AssignTargets, TieBreaksTowardLowerAnchorIndex) {
  const AnchorLayout layout = build_layout();
  // (16, 8) is equidistant from the top-left and top-right anchors.
  const Assignment a = assign_targets({at(16, 8)}, {0, 0, 0, 0}, layout);
  EXPECT_TRUE(a.slots[0].has_value());
  EXPECT_FALSE(a.slots[1].has_value());
}

TEST(AssignTargets, CapacityError) {
  const AnchorLayout layout = build_layout();
  std::vector<TargetTruth> targets;
  for (int i = 0; i < 6; ++i) targets.push_back(at(4 + 4 * i, 16));
  EXPECT_THROW(assign_targets(targets, {0, 0, 0, 0}, layout), Error);
}

TEST(AssignTargets, AgreesWithBruteForceOracle) {
  const AnchorLayout layout = build_layout();
  Rng rng(101);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const CellOrigin origin{32 * static_cast<int>(rng.below(10)),
                            32 * static_cast<int>(rng.below(10)), 0, 0};
    std::vector<TargetTruth> targets;
    const int n = static_cast<int>(rng.below(6));
    for (int i = 0; i < n; ++i)
      targets.push_back(at(origin.x0 + rng.uniform(0.0, 32.0),
                           origin.y0 + rng.uniform(0.0, 32.0)));
    // Distinct pair distances keep both routes tie-free.
    std::vector<double> d2;
    for (const auto& t : targets)
      for (const auto& a : layout.anchors)
        d2.push_back(std::pow(t.x - origin.x0 - a.x, 2) +
                     std::pow(t.y - origin.y0 - a.y, 2));
    std::sort(d2.begin(), d2.end());
    bool distinct = true;
    for (std::size_t i = 1; i < d2.size(); ++i)
      if (d2[i] - d2[i - 1] < 1e-9) distinct = false;
    if (!distinct) continue;
    ++checked;
    EXPECT_TRUE(same_bindings(assign_targets(targets, origin, layout),
                              brute_force_assign(targets, origin, layout)));
  }
  EXPECT_GT(checked, 400);
}

TEST(AssignTargets, PermutationInvariantUpToTies) {
  const AnchorLayout layout = build_layout();
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TargetTruth> targets;
    const int n = 2 + static_cast<int>(rng.below(4));
    for (int i = 0; i < n; ++i)
      targets.push_back(at(rng.uniform(0.0, 32.0), rng.uniform(0.0, 32.0)));
    const Assignment base = assign_targets(targets, {0, 0, 0, 0}, layout);
    std::vector<TargetTruth> permuted = targets;
    rng.shuffle(permuted.begin(), permuted.end());
    EXPECT_TRUE(same_bindings(base, assign_targets(permuted, {0, 0, 0, 0}, layout)));
  }
}

TEST(AssignTargets, SingleTargetBindsToNearestAnchor) {
  const AnchorLayout layout = build_layout();
  Rng rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    const TargetTruth t = at(rng.uniform(0.0, 32.0), rng.uniform(0.0, 32.0));
    const Assignment a = assign_targets({t}, {0, 0, 0, 0}, layout);
    int bound = -1;
    double best = std::numeric_limits<double>::infinity();
    int nearest = -1;
    for (int i = 0; i < 5; ++i) {
      if (a.slots[i]) bound = i;
      const double d = std::hypot(t.x - layout.anchors[i].x, t.y - layout.anchors[i].y);
      if (d < best) {
        best = d;
        nearest = i;
      }
    }
    EXPECT_EQ(bound, nearest);
  }
}

TEST(AssignTargets, OffsetsBoundedByCellSize) {
  const AnchorLayout layout = build_layout();
  Rng rng(91);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TargetTruth> targets;
    const int n = static_cast<int>(rng.below(6));
    for (int i = 0; i < n; ++i)
      targets.push_back(at(rng.uniform(0.0, 32.0), rng.uniform(0.0, 32.0)));
    const Assignment a = assign_targets(targets, {0, 0, 0, 0}, layout);
    for (const auto& slot : a.slots) {
      if (!slot) continue;
      EXPECT_LE(std::fabs(slot->dx), layout.cell_size);
      EXPECT_LE(std::fabs(slot->dy), layout.cell_size);
    }
  }
}

TEST(Partition, CellsCoverEveryTargetExactlyOnce) {
  const AnchorLayout layout = build_layout();
  Rng rng(13);
  std::vector<TargetTruth> truth;
  for (int i = 0; i < 80; ++i)
    truth.push_back(at(rng.uniform(0.0, 100.0), rng.uniform(0.0, 70.0)));
  std::size_t total = 0;
  std::set<std::pair<double, double>> seen;
  for (const CellOrigin& origin : cells_covering(100, 70, layout)) {
    for (const TargetTruth& t : targets_in_cell(truth, origin, layout)) {
      total++;
      EXPECT_TRUE(seen.insert({t.x, t.y}).second) << "duplicate membership";
    }
  }
  EXPECT_EQ(total, truth.size());
}

TEST(ReflectIndex, FoldsIntoRange) {
  EXPECT_EQ(reflect_index(0, 32), 0);
  EXPECT_EQ(reflect_index(-1, 32), 0);
  EXPECT_EQ(reflect_index(-2, 32), 1);
  EXPECT_EQ(reflect_index(31, 32), 31);
  EXPECT_EQ(reflect_index(32, 32), 31);
  EXPECT_EQ(reflect_index(33, 32), 30);
  EXPECT_EQ(reflect_index(-5, 2), 0);  // tiny images keep folding
  EXPECT_EQ(reflect_index(7, 1), 0);
}

TEST(ExtractChip, InteriorEqualsDirectCrop) {
  const AnchorLayout layout = build_layout();
  Rng rng(3);
  Image img = Image::filled(256, 256, 0, 0, 0);
  for (auto& b : img.data) b = static_cast<std::uint8_t>(rng.below(256));
  const CellOrigin origin{96, 64, 2, 3};
  const Image chip = extract_chip(img, origin, layout);
  ASSERT_EQ(chip.width, 80);
  ASSERT_EQ(chip.height, 80);
  for (int i = 0; i < 80; ++i)
    for (int j = 0; j < 80; ++j)
      ASSERT_EQ(chip.pixel(i, j)[1], img.pixel(64 - 24 + i, 96 - 24 + j)[1]);
}

TEST(ExtractChip, ReflectsAtBorders) {
  const AnchorLayout layout = build_layout();
  Rng rng(4);
  Image img = Image::filled(256, 256, 0, 0, 0);
  for (auto& b : img.data) b = static_cast<std::uint8_t>(rng.below(256));

  const Image tl = extract_chip(img, {0, 0, 0, 0}, layout);
  // chip pixel (0,0) sits at global (-24,-24) -> reflects to (23,23)
  EXPECT_EQ(tl.pixel(0, 0)[0], img.pixel(23, 23)[0]);
  EXPECT_EQ(tl.pixel(0, 30)[2], img.pixel(23, 6)[2]);

  const Image br = extract_chip(img, {224, 224, 7, 7}, layout);
  // chip pixel (79,79) sits at global (279,279) -> reflects to (232,232)
  EXPECT_EQ(br.pixel(79, 79)[0], img.pixel(232, 232)[0]);
}
