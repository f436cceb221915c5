#pragma once

// Lesion-wise scoring: the reference is split into connected lesions, each
// predicted component is attached to at most one lesion through overlap with
// the dilated lesion, every lesion is scored on its own, and unattached
// predicted components are scored as misses.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "toposeg/error.hpp"
#include "toposeg/geometry.hpp"
#include "toposeg/metrics.hpp"
#include "toposeg/volume.hpp"

namespace toposeg {

struct LesionwiseConfig {
  Connectivity connectivity = Connectivity::k26;
  /// Iterations of 26-neighbourhood dilation applied to each reference lesion.
  int dilation_iters = 1;
  /// Reference lesions with fewer voxels are ignored.
  std::size_t min_lesion_size = 0;

  void validate() const {
    if (dilation_iters < 0) throw ValidationError("lesionwise dilation_iters must be >= 0");
  }
};

struct LesionMatch {
  ComponentLabeling ref;
  ComponentLabeling pred;
  /// matched[k-1]: ids of the predicted components attached to lesion k, ascending.
  std::vector<std::vector<std::uint32_t>> matched;
  /// ignored[k-1]: lesion k is below the size threshold and is not scored.
  std::vector<bool> ignored;
  /// Predicted component ids attached to no lesion, ascending.
  std::vector<std::uint32_t> false_positives;
  int dilation_iters = 1;
  std::size_t min_lesion_size = 0;
  Spacing spacing{1.0, 1.0, 1.0};
  std::vector<Box> ref_boxes;
  std::vector<Box> pred_boxes;

  [[nodiscard]] std::size_t scored_lesions() const {
    return static_cast<std::size_t>(std::count(ignored.begin(), ignored.end(), false));
  }
};

namespace detail {

inline std::vector<Box> component_boxes(const ComponentLabeling& cc) {
  constexpr auto kMax = std::numeric_limits<std::int64_t>::max();
  constexpr auto kMin = std::numeric_limits<std::int64_t>::min();
  std::vector<Box> boxes(cc.count(), Box{{kMax, kMax, kMax}, {kMin, kMin, kMin}});
  for (std::size_t i = 0; i < cc.ids.size(); ++i) {
    const auto id = cc.ids[i];
    if (id == 0) continue;
    const auto c = cc.ids.coords(i);
    auto& b = boxes[id - 1];
    b.lo = {std::min(b.lo.x, c.x), std::min(b.lo.y, c.y), std::min(b.lo.z, c.z)};
    b.hi = {std::max(b.hi.x, c.x), std::max(b.hi.y, c.y), std::max(b.hi.z, c.z)};
  }
  return boxes;
}

inline std::vector<std::vector<std::size_t>> component_voxels(const ComponentLabeling& cc) {
  std::vector<std::vector<std::size_t>> out(cc.count());
  for (std::size_t k = 0; k < cc.count(); ++k) out[k].reserve(cc.sizes[k]);
  for (std::size_t i = 0; i < cc.ids.size(); ++i) {
    if (cc.ids[i] != 0) out[cc.ids[i] - 1].push_back(i);
  }
  return out;
}

}  // namespace detail

/// Decomposes both masks into components and attaches every predicted
/// component to the reference lesion whose dilation it overlaps most (ties to
/// the lower lesion id); components overlapping no dilated lesion are false
/// positives.
inline LesionMatch match_lesions(const Mask& pred, const Mask& ref, const LesionwiseConfig& cfg = {}) {
  cfg.validate();
  require_same_geometry(pred.geometry(), ref.geometry(), "prediction and reference");
  LesionMatch m;
  m.ref = connected_components(ref, cfg.connectivity);
  m.pred = connected_components(pred, cfg.connectivity);
  m.dilation_iters = cfg.dilation_iters;
  m.min_lesion_size = cfg.min_lesion_size;
  m.spacing = ref.spacing();
  m.ref_boxes = detail::component_boxes(m.ref);
  m.pred_boxes = detail::component_boxes(m.pred);

  const auto lesions = m.ref.count();
  const auto comps = m.pred.count();
  m.matched.assign(lesions, {});
  m.ignored.assign(lesions, false);
  for (std::size_t k = 0; k < lesions; ++k) m.ignored[k] = m.ref.sizes[k] < cfg.min_lesion_size;

  // overlap[k][pid] = |dilate(lesion k) ∩ component pid|
  std::vector<std::map<std::uint32_t, std::size_t>> overlap(lesions);
  const auto ball = neighbor_offsets(Connectivity::k26);
  Volume<std::uint32_t> stamp = ref.like<std::uint32_t>();
  const auto voxels = detail::component_voxels(m.ref);
  std::vector<std::size_t> frontier;
  std::vector<std::size_t> next;
  for (std::size_t k = 0; k < lesions; ++k) {
    const auto tag = static_cast<std::uint32_t>(k + 1);
    auto visit = [&](std::size_t i) {
      stamp[i] = tag;
      if (const auto pid = m.pred.ids[i]; pid != 0) ++overlap[k][pid];
    };
    frontier = voxels[k];
    for (auto i : frontier) visit(i);
    for (int it = 0; it < cfg.dilation_iters && !frontier.empty(); ++it) {
      next.clear();
      for (auto i : frontier) {
        const auto c = ref.coords(i);
        for (const auto& o : ball) {
          if (!ref.in_bounds(c.x + o[0], c.y + o[1], c.z + o[2])) continue;
          const auto j = ref.index(c.x + o[0], c.y + o[1], c.z + o[2]);
          if (stamp[j] == tag) continue;
          visit(j);
          next.push_back(j);
        }
      }
      frontier.swap(next);
    }
  }

  for (std::uint32_t pid = 1; pid <= comps; ++pid) {
    std::size_t best_count = 0;
    std::size_t best_lesion = 0;
    for (std::size_t k = 0; k < lesions; ++k) {
      const auto it = overlap[k].find(pid);
      if (it != overlap[k].end() && it->second > best_count) {
        best_count = it->second;
        best_lesion = k + 1;
      }
    }
    if (best_lesion == 0) {
      m.false_positives.push_back(pid);
    } else {
      m.matched[best_lesion - 1].push_back(pid);
    }
  }
  return m;
}

struct LesionMetric {
  enum class Kind { kDice, kNsd, kHd95 };
  Kind kind = Kind::kDice;
  double tau = 1.0;  // NSD only

  static LesionMetric dice() { return {Kind::kDice, 0.0}; }
  static LesionMetric nsd(double tau) { return {Kind::kNsd, tau}; }
  static LesionMetric hd95() { return {Kind::kHd95, 0.0}; }
};

/// Per-lesion and per-false-positive scores for every configured metric.
struct LesionwiseScores {
  std::vector<double> dice;
  std::vector<std::vector<double>> nsd;  // nsd[t] for cfg.nsd_tolerances[t]
  std::vector<double> hd;
};

namespace detail {

inline double mean_or(const std::vector<double>& v, double empty_value) {
  if (v.empty()) return empty_value;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

/// Scores every non-ignored lesion (in lesion id order) followed by every
/// false positive (in component id order).
inline LesionwiseScores lesionwise_scores(const LesionMatch& m, const MetricConfig& cfg = {}) {
  cfg.validate();
  LesionwiseScores out;
  out.nsd.resize(cfg.nsd_tolerances.size());
  const Spacing spacing = cfg.effective_spacing(m.spacing);
  const auto& ext = m.ref.ids.extent();

  auto miss = [&] {
    out.dice.push_back(cfg.one_empty_score);
    for (auto& v : out.nsd) v.push_back(cfg.one_empty_score);
    out.hd.push_back(cfg.hd_empty_penalty);
  };

  for (std::size_t k = 0; k < m.matched.size(); ++k) {
    if (m.ignored[k]) continue;
    const auto& comps = m.matched[k];
    if (comps.empty()) {
      miss();
      continue;
    }
    // Crop to the union box plus a one-voxel margin; the margin keeps the
    // surface classification identical to the full volume.
    Box box = m.ref_boxes[k];
    for (auto pid : comps) {
      const auto& b = m.pred_boxes[pid - 1];
      box.lo = {std::min(box.lo.x, b.lo.x), std::min(box.lo.y, b.lo.y), std::min(box.lo.z, b.lo.z)};
      box.hi = {std::max(box.hi.x, b.hi.x), std::max(box.hi.y, b.hi.y), std::max(box.hi.z, b.hi.z)};
    }
    box.lo = {std::max<std::int64_t>(box.lo.x - 1, 0), std::max<std::int64_t>(box.lo.y - 1, 0),
              std::max<std::int64_t>(box.lo.z - 1, 0)};
    box.hi = {std::min<std::int64_t>(box.hi.x + 1, static_cast<std::int64_t>(ext[0]) - 1),
              std::min<std::int64_t>(box.hi.y + 1, static_cast<std::int64_t>(ext[1]) - 1),
              std::min<std::int64_t>(box.hi.z + 1, static_cast<std::int64_t>(ext[2]) - 1)};
    const auto ref_ids = crop(m.ref.ids, box);
    const auto pred_ids = crop(m.pred.ids, box);
    Mask lesion = ref_ids.like<std::uint8_t>();
    Mask predicted = ref_ids.like<std::uint8_t>();
    lesion.set_spacing(spacing);
    predicted.set_spacing(spacing);
    for (std::size_t i = 0; i < ref_ids.size(); ++i) {
      lesion[i] = ref_ids[i] == k + 1 ? 1 : 0;
      predicted[i] = std::binary_search(comps.begin(), comps.end(), pred_ids[i]) ? 1 : 0;
    }
    out.dice.push_back(dice(predicted, lesion, cfg));
    const auto d = surface_distances(predicted, lesion, spacing);
    for (std::size_t t = 0; t < cfg.nsd_tolerances.size(); ++t) out.nsd[t].push_back(nsd(d, cfg.nsd_tolerances[t], cfg));
    out.hd.push_back(hausdorff(d, cfg));
  }
  for (std::size_t f = 0; f < m.false_positives.size(); ++f) miss();
  return out;
}

/// Mean of one metric over scored lesions plus false positives; with nothing
/// on either side the empty-empty value is returned.
inline double lesionwise_score(const LesionMatch& m, const LesionMetric& metric, const MetricConfig& cfg = {}) {
  MetricConfig local = cfg;
  if (metric.kind == LesionMetric::Kind::kNsd) {
    if (!(metric.tau > 0.0)) throw ValidationError("lesionwise nsd needs a tolerance > 0");
    local.nsd_tolerances = {metric.tau};
  } else {
    local.nsd_tolerances.clear();
  }
  const auto s = lesionwise_scores(m, local);
  switch (metric.kind) {
    case LesionMetric::Kind::kDice: return detail::mean_or(s.dice, cfg.empty_empty_score);
    case LesionMetric::Kind::kNsd: return detail::mean_or(s.nsd.front(), cfg.empty_empty_score);
    case LesionMetric::Kind::kHd95: return detail::mean_or(s.hd, 0.0);
  }
  throw ValidationError("unknown lesion metric");
}

}  // namespace toposeg
