#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "toposeg/metrics.hpp"
#include "toposeg/perturb.hpp"
#include "toposeg/refine.hpp"

using namespace toposeg;

namespace {

std::size_t region_components(const LabelMap& l, const std::string& region) {
  return connected_components(channelize(l, RegionSpec::brats(), region), Connectivity::k26).count();
}

/// Nested tumor with an ET core cut by an erased slab that stays inside the edema.
LabelMap cut_core(std::size_t n = 22) {
  LabelMap l(Extent{n, n, n});
  const double c = (double(n) - 1.0) / 2.0;
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double d = std::sqrt((x - c) * (x - c) + (y - c) * (y - c) + (z - c) * (z - c));
        if (d <= 6.0) l(x, y, z) = (z + 1 >= n / 2 && z <= n / 2) ? 0 : 3;
        else if (d <= 9.0) l(x, y, z) = 2;
      }
  return l;
}

std::vector<LabelMap> fixture_suite() {
  std::vector<LabelMap> out{LabelMap(Extent{8, 8, 8}), fixture::nested_tumor(16, 6), fixture::sphere(14, 5, 3),
                            cut_core()};
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto clean = fixture::nested_tumor(18, 7);
    const auto mask = field_to_mask(level_set_band(sample_poly_field(clean.geometry(), 6, seed)), 0.1);
    for (auto mode : {PerturbMode::kErase, PerturbMode::kInsert, PerturbMode::kSwap})
      out.push_back(perturb_labels(clean, mask, mode, seed));
  }
  for (int k = 0; k < 4; ++k) {
    LabelMap noisy(Extent{10, 9, 8});
    for (auto& v : noisy) v = rng() % 5 == 0 ? std::uint8_t(1 + rng() % 3) : 0;
    out.push_back(noisy);
  }
  return out;
}

}  // namespace

TEST(RemoveSmall, KeepsOnlyLargeComponents) {
  LabelMap l(Extent{20, 10, 10});
  Mask m(l.geometry());
  fixture::fill_box(m, {0, 0, 0}, {3, 3, 1});    // 9 voxels
  fixture::fill_box(m, {8, 0, 0}, {13, 5, 2});   // 50 voxels
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = m[i] ? 3 : 0;
  const auto out = remove_small_components(l, RefineConfig{});
  EXPECT_EQ(count_nonzero(out), 50U);
  EXPECT_EQ(out(0, 0, 0), 0);
  EXPECT_EQ(out(8, 0, 0), 3);

  RefineConfig zero;
  zero.default_min_size = 0;
  EXPECT_EQ(remove_small_components(l, zero), l);
  RefineConfig per_region;
  per_region.min_component_size["ET"] = 51;
  EXPECT_EQ(count_nonzero(remove_small_components(l, per_region)), 0U);
}

TEST(RemoveSmall, NeverAddsComponents) {
  for (const auto& l : fixture_suite()) {
    const auto out = remove_small_components(l, RefineConfig{});
    for (const auto& r : RegionSpec::brats().regions()) EXPECT_LE(region_components(out, r.name), region_components(l, r.name));
  }
}

TEST(FillHoles, HollowEtShellBecomesSolid) {
  LabelMap l(Extent{9, 9, 9});
  Mask shell(l.geometry());
  fixture::fill_box(shell, {1, 1, 1}, {8, 8, 8});
  fixture::fill_box(shell, {3, 3, 3}, {6, 6, 6}, 0);
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = shell[i] ? 3 : 0;
  const auto out = fill_region_holes(l, RefineConfig{});
  EXPECT_EQ(count_nonzero(out), 343U);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_TRUE(out[i] == 0 || out[i] == 3);
  EXPECT_EQ(out(4, 4, 4), 3);

  RefineConfig off;
  off.fill_holes["ET"] = false;
  EXPECT_EQ(fill_region_holes(l, off), l);

  for (std::size_t i = 0; i < l.size(); ++i) l[i] = shell[i] ? 2 : 0;  // SNFH is off by default
  EXPECT_EQ(fill_region_holes(l, RefineConfig{}), l);
}

TEST(FillHoles, NeverShrinksRegions) {
  for (const auto& l : fixture_suite()) {
    const auto out = fill_region_holes(l, RefineConfig{});
    for (const auto& r : RegionSpec::brats().regions()) {
      EXPECT_GE(count_nonzero(channelize(out, RegionSpec::brats(), r.name)),
                count_nonzero(channelize(l, RegionSpec::brats(), r.name)));
    }
  }
}

TEST(Hierarchy, BubbleInsideNetcBecomesNetc) {
  LabelMap l(Extent{7, 7, 7});
  Mask blob(l.geometry());
  fixture::fill_box(blob, {1, 1, 1}, {6, 6, 6});
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = blob[i];
  l(3, 3, 3) = 0;
  const auto out = enforce_hierarchy(l);
  EXPECT_EQ(out(3, 3, 3), 1);
  EXPECT_EQ(count_nonzero(out), 125U);
}

TEST(Hierarchy, MajorityAndTies) {
  // One-voxel cavity: four ET faces and two SNFH faces.
  LabelMap l(Extent{5, 5, 5});
  Mask blob(l.geometry());
  fixture::fill_box(blob, {1, 1, 1}, {4, 4, 4});
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = blob[i] ? 3 : 0;
  l(2, 2, 2) = 0;
  l(2, 2, 1) = 2;
  l(2, 2, 3) = 2;
  EXPECT_EQ(enforce_hierarchy(l)(2, 2, 2), 3);
  // Three ET, three SNFH: lowest tied label.
  l(2, 1, 2) = 2;
  EXPECT_EQ(enforce_hierarchy(l)(2, 2, 2), 2);
  // NETC in the tie wins.
  l(1, 2, 2) = 1;
  l(3, 2, 2) = 1;
  l(2, 3, 2) = 1;
  l(2, 1, 2) = 3;
  l(2, 2, 1) = 3;
  l(2, 2, 3) = 3;
  EXPECT_EQ(enforce_hierarchy(l)(2, 2, 2), 1);
}

TEST(Hierarchy, NoOpOnWellFormedOrEmpty) {
  const auto nested = fixture::nested_tumor(16, 6);
  EXPECT_EQ(enforce_hierarchy(nested), nested);
  const LabelMap empty(Extent{6, 6, 6});
  EXPECT_EQ(enforce_hierarchy(empty), empty);
}

TEST(Refine, CleanInputUnchanged) {
  for (const auto& l : {fixture::nested_tumor(16, 6), fixture::sphere(12, 4), LabelMap(Extent{4, 4, 4})}) {
    EXPECT_EQ(refine(l), l);
  }
}

TEST(Refine, ReconnectsEnclosedSlabCut) {
  const auto cut = cut_core();
  EXPECT_EQ(region_components(cut, "ET"), 2U);
  EXPECT_EQ(count_nonzero(enclosed_background(foreground(cut))) > 0, true);
  const auto out = refine(cut);
  EXPECT_EQ(region_components(out, "ET"), 1U);
  EXPECT_EQ(connected_components(foreground(out)).count(), 1U);
  EXPECT_EQ(count_nonzero(enclosed_background(foreground(out))), 0U);
}

TEST(Refine, IdempotentValidAndGated) {
  for (const auto& l : fixture_suite()) {
    const auto once = refine(l);
    EXPECT_NO_THROW(validate_labels(once));
    EXPECT_EQ(refine(once), once);
  }
  LabelMap bad(Extent{2, 2, 2});
  bad[0] = 7;
  EXPECT_THROW((void)refine(bad), LabelError);
}

TEST(Refine, HelpsOnEraseSuite) {
  double before = 0.0, after = 0.0;
  int n = 0;
  PerturbConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto clean = fixture::nested_tumor(20, 8);
    const auto mask = field_to_mask(level_set_band(sample_poly_field(clean.geometry(), cfg.degree, seed)), cfg.fraction);
    const auto bad = perturb_labels(clean, mask, PerturbMode::kErase, seed);
    const auto fixed = refine(bad);
    for (const auto& r : RegionSpec::brats().regions()) {
      const auto c = channelize(clean, RegionSpec::brats(), r.name);
      before += dice(channelize(bad, RegionSpec::brats(), r.name), c);
      after += dice(channelize(fixed, RegionSpec::brats(), r.name), c);
      ++n;
    }
  }
  EXPECT_GE(after / n, before / n);
}
