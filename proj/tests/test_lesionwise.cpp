#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "toposeg/lesionwise.hpp"

using namespace toposeg;

namespace {

Mask box(Extent e, std::array<std::size_t, 3> lo, std::array<std::size_t, 3> hi) {
  Mask m(e);
  fixture::fill_box(m, lo, hi);
  return m;
}

Mask unite(Mask a, const Mask& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = a[i] || b[i];
  return a;
}

}  // namespace

TEST(MatchLesions, IdenticalSingleLesion) {
  const auto ref = box({12, 12, 12}, {3, 3, 3}, {7, 8, 6});
  const auto m = match_lesions(ref, ref);
  ASSERT_EQ(m.ref.count(), 1U);
  ASSERT_EQ(m.matched.size(), 1U);
  EXPECT_EQ(m.matched[0], (std::vector<std::uint32_t>{1}));
  EXPECT_TRUE(m.false_positives.empty());
  for (auto metric : {LesionMetric::dice(), LesionMetric::nsd(0.5), LesionMetric::nsd(1.0)}) {
    EXPECT_EQ(lesionwise_score(m, metric), 1.0);
  }
  EXPECT_EQ(lesionwise_score(m, LesionMetric::hd95()), 0.0);
}

TEST(MatchLesions, FarComponentIsFalsePositive) {
  const Extent e{30, 8, 8};
  const auto ref = box(e, {1, 1, 1}, {5, 5, 5});
  const auto pred = unite(ref, box(e, {15, 1, 1}, {18, 4, 4}));  // 10 voxels beyond the lesion
  const auto m = match_lesions(pred, ref);
  EXPECT_EQ(m.matched[0], (std::vector<std::uint32_t>{1}));
  EXPECT_EQ(m.false_positives, (std::vector<std::uint32_t>{2}));
  EXPECT_NEAR(lesionwise_score(m, LesionMetric::dice()), 0.5, 1e-12);
  EXPECT_NEAR(lesionwise_score(m, LesionMetric::nsd(1.0)), 0.5, 1e-12);
  EXPECT_NEAR(lesionwise_score(m, LesionMetric::hd95()), 187.0, 1e-12);
}

TEST(MatchLesions, LargestIntersectionWins) {
  // One bar touching lesion A's dilation in 5 voxels and B's in 3.
  const Extent e{20, 5, 5};
  const auto a = box(e, {0, 0, 0}, {4, 3, 3});
  const auto b = box(e, {12, 0, 0}, {15, 3, 3});
  Mask bar(e);
  for (std::size_t x = 0; x < 14; ++x) bar(x, 3, 3) = 1;
  const auto da = dilate(a, Connectivity::k26, 1);
  const auto db = dilate(b, Connectivity::k26, 1);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < bar.size(); ++i) {
    ia += bar[i] && da[i];
    ib += bar[i] && db[i];
  }
  ASSERT_EQ(ia, 5U);
  ASSERT_EQ(ib, 3U);
  const auto m = match_lesions(bar, unite(a, b));
  ASSERT_EQ(m.pred.count(), 1U);
  EXPECT_EQ(m.matched[0], (std::vector<std::uint32_t>{1}));
  EXPECT_TRUE(m.matched[1].empty());
  EXPECT_TRUE(m.false_positives.empty());
}

TEST(MatchLesions, TieGoesToLowerLesionId) {
  const Extent e{11, 3, 3};
  Mask ref(e);
  ref(1, 1, 1) = 1;
  ref(9, 1, 1) = 1;
  Mask pred(e);
  for (std::size_t x = 2; x <= 8; ++x) pred(x, 1, 1) = 1;  // touches both dilations in one voxel each
  const auto m = match_lesions(pred, ref);
  EXPECT_EQ(m.matched[0], (std::vector<std::uint32_t>{1}));
  EXPECT_TRUE(m.matched[1].empty());
}

TEST(MatchLesions, EveryComponentCountedOnce) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto ref = fixture::random_mask(rng, {12, 12, 12}, 0.04);
    const auto pred = fixture::random_mask(rng, {12, 12, 12}, 0.04);
    LesionwiseConfig cfg;
    cfg.min_lesion_size = trial % 3;
    const auto m = match_lesions(pred, ref, cfg);
    std::vector<int> seen(m.pred.count() + 1, 0);
    for (const auto& v : m.matched)
      for (auto id : v) ++seen[id];
    for (auto id : m.false_positives) ++seen[id];
    for (std::size_t k = 1; k < seen.size(); ++k) EXPECT_EQ(seen[k], 1);
    for (std::size_t k = 0; k < m.ignored.size(); ++k) EXPECT_EQ(m.ignored[k], m.ref.sizes[k] < cfg.min_lesion_size);
    const auto s = lesionwise_scores(m);
    EXPECT_EQ(s.dice.size(), m.scored_lesions() + m.false_positives.size());
    for (double d : s.dice) {
      EXPECT_GE(d, 0.0);
      EXPECT_LE(d, 1.0);
    }
    for (double h : s.hd) {
      EXPECT_GE(h, 0.0);
      EXPECT_LE(h, 374.0);
    }
  }
}

TEST(Lesionwise, EqualsLegacyForSingleMatchedLesion) {
  std::mt19937_64 rng(17);
  const Spacing s{1.0, 0.8, 1.7};
  for (int trial = 0; trial < 20; ++trial) {
    Mask ref(Extent{16, 16, 16}, s);
    Mask pred(Extent{16, 16, 16}, s);
    std::uniform_int_distribution<std::size_t> lo(2, 6), len(3, 7), jit(0, 2);
    const std::array<std::size_t, 3> a{lo(rng), lo(rng), lo(rng)};
    const std::array<std::size_t, 3> n{len(rng), len(rng), len(rng)};
    fixture::fill_box(ref, a, {a[0] + n[0], a[1] + n[1], a[2] + n[2]});
    const std::array<std::size_t, 3> b{a[0] + jit(rng), a[1] + jit(rng), a[2]};
    fixture::fill_box(pred, b, {b[0] + n[0], b[1] + n[1], b[2] + len(rng)});
    const auto m = match_lesions(pred, ref);
    ASSERT_EQ(m.ref.count(), 1U);
    ASSERT_EQ(m.pred.count(), 1U);
    ASSERT_EQ(m.matched[0].size(), 1U);
    EXPECT_EQ(lesionwise_score(m, LesionMetric::dice()), dice(pred, ref));
    for (double tau : {0.5, 1.0}) EXPECT_EQ(lesionwise_score(m, LesionMetric::nsd(tau)), nsd(pred, ref, s, tau));
    EXPECT_EQ(lesionwise_score(m, LesionMetric::hd95()), hd95(pred, ref, s));
  }
}

TEST(Lesionwise, EmptyConventions) {
  const Mask e(Extent{5, 5, 5});
  const auto m = match_lesions(e, e);
  EXPECT_EQ(lesionwise_score(m, LesionMetric::dice()), 1.0);
  EXPECT_EQ(lesionwise_score(m, LesionMetric::nsd(0.5)), 1.0);
  EXPECT_EQ(lesionwise_score(m, LesionMetric::hd95()), 0.0);

  const auto ref = box({5, 5, 5}, {1, 1, 1}, {3, 3, 3});
  const auto missed = match_lesions(e, ref);
  EXPECT_EQ(lesionwise_score(missed, LesionMetric::dice()), 0.0);
  EXPECT_EQ(lesionwise_score(missed, LesionMetric::hd95()), 374.0);
}

TEST(Lesionwise, FarFalsePositiveLowersLesionDiceMoreThanLegacy) {
  const Extent e{40, 10, 10};
  const auto ref = box(e, {1, 1, 1}, {9, 9, 9});
  const auto pred0 = box(e, {2, 1, 1}, {9, 9, 9});
  const auto extra = box(e, {30, 4, 4}, {32, 6, 6});
  const auto pred1 = unite(pred0, extra);
  const double lw0 = lesionwise_score(match_lesions(pred0, ref), LesionMetric::dice());
  const double lw1 = lesionwise_score(match_lesions(pred1, ref), LesionMetric::dice());
  EXPECT_LT(lw1, lw0);
  const double rel = double(count_nonzero(extra)) / double(count_nonzero(pred1) + count_nonzero(ref));
  EXPECT_LE(dice(pred0, ref) - dice(pred1, ref), 2 * rel + 1e-12);
}

TEST(Lesionwise, IgnoredLesionsAbsorbTheirComponents) {
  const Extent e{20, 6, 6};
  Mask ref = box(e, {1, 1, 1}, {5, 5, 5});
  ref(15, 3, 3) = 1;  // one-voxel lesion
  Mask pred = ref;
  LesionwiseConfig cfg;
  cfg.min_lesion_size = 2;
  const auto m = match_lesions(pred, ref, cfg);
  EXPECT_EQ(m.scored_lesions(), 1U);
  EXPECT_TRUE(m.false_positives.empty());
  EXPECT_EQ(lesionwise_score(m, LesionMetric::dice()), 1.0);
}

TEST(Lesionwise, CroppingDoesNotChangeScores) {
  // Lesion touching the volume border: the cropped evaluation must match a
  // whole-volume evaluation of the same lesion.
  const Extent e{14, 14, 14};
  const Spacing s{1.2, 0.9, 1.0};
  Mask ref(e, s), pred(e, s);
  fixture::fill_box(ref, {0, 0, 0}, {5, 6, 4});
  fixture::fill_box(ref, {9, 9, 9}, {14, 14, 14});
  fixture::fill_box(pred, {0, 1, 0}, {6, 6, 5});
  fixture::fill_box(pred, {10, 9, 8}, {14, 13, 14});
  const auto m = match_lesions(pred, ref);
  const auto sc = lesionwise_scores(m);
  ASSERT_EQ(sc.dice.size(), 2U);
  for (std::uint32_t k = 1; k <= 2; ++k) {
    Mask l(e, s), p(e, s);
    for (std::size_t i = 0; i < l.size(); ++i) {
      l[i] = m.ref.ids[i] == k;
      p[i] = m.pred.ids[i] != 0 &&
             std::find(m.matched[k - 1].begin(), m.matched[k - 1].end(), m.pred.ids[i]) != m.matched[k - 1].end();
    }
    EXPECT_EQ(sc.dice[k - 1], oracle::dice(p, l));
    EXPECT_NEAR(sc.nsd[1][k - 1], oracle::nsd(p, l, s, 1.0), 1e-12);
    EXPECT_EQ(sc.hd[k - 1], oracle::hd95(p, l, s));
  }
}
