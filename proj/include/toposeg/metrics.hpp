#pragma once

// Whole-volume overlap and surface metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "toposeg/error.hpp"
#include "toposeg/geometry.hpp"
#include "toposeg/labels.hpp"
#include "toposeg/volume.hpp"

namespace toposeg {

enum class DistanceUnit { kMillimeter, kVoxel };

/// How the two directed surface-distance sets are reduced to one HD value.
enum class HdCombine {
  kMaxOfDirected,  // max(P(d(S_p, S_r)), P(d(S_r, S_p)))
  kPooled,         // P(d(S_p, S_r) ∪ d(S_r, S_p))
};

struct MetricConfig {
  std::vector<double> nsd_tolerances{0.5, 1.0};
  double hd_percentile = 95.0;
  double empty_empty_score = 1.0;
  double one_empty_score = 0.0;
  double hd_empty_penalty = 374.0;
  DistanceUnit unit = DistanceUnit::kMillimeter;
  HdCombine hd_combine = HdCombine::kMaxOfDirected;

  void validate() const {
    for (double t : nsd_tolerances) {
      if (!(t > 0.0)) throw ValidationError("nsd tolerance must be > 0, got " + std::to_string(t));
    }
    if (!(hd_percentile > 0.0 && hd_percentile <= 100.0)) {
      throw ValidationError("hd percentile must be in (0,100], got " + std::to_string(hd_percentile));
    }
    if (!(hd_empty_penalty >= 0.0)) throw ValidationError("hd empty penalty must be >= 0");
  }

  /// Spacing used for distances: the image spacing, or unit spacing when
  /// distances are measured in voxels.
  [[nodiscard]] Spacing effective_spacing(const Spacing& s) const {
    return unit == DistanceUnit::kVoxel ? Spacing{1.0, 1.0, 1.0} : s;
  }
};

/// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value.
inline double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

inline double dice(const Mask& pred, const Mask& ref, const MetricConfig& cfg = {}) {
  require_same_geometry(pred.geometry(), ref.geometry(), "prediction and reference");
  std::size_t np = 0;
  std::size_t nr = 0;
  std::size_t both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool r = ref[i] != 0;
    np += p;
    nr += r;
    both += (p && r);
  }
  if (np == 0 && nr == 0) return cfg.empty_empty_score;
  if (np == 0 || nr == 0) return cfg.one_empty_score;
  return 2.0 * static_cast<double>(both) / static_cast<double>(np + nr);
}

/// Directed surface distances between two masks, computed once and shared by
/// every NSD tolerance and the HD percentile.
struct SurfaceDistances {
  std::vector<double> pred_to_ref;  // d(p, S_r) for p in S_p, scan order
  std::vector<double> ref_to_pred;  // d(r, S_p) for r in S_r, scan order
  bool pred_empty = true;
  bool ref_empty = true;
};

inline SurfaceDistances surface_distances(const Mask& pred, const Mask& ref, const Spacing& spacing,
                                          unsigned threads = 1) {
  require_same_geometry(pred.geometry(), ref.geometry(), "prediction and reference");
  SurfaceDistances out;
  const Mask sp = surface_mask(pred);
  const Mask sr = surface_mask(ref);
  out.pred_empty = count_nonzero(sp) == 0;
  out.ref_empty = count_nonzero(sr) == 0;
  if (out.pred_empty || out.ref_empty) return out;
  const ScalarField to_ref = edt(sr, spacing, threads);
  const ScalarField to_pred = edt(sp, spacing, threads);
  for (std::size_t i = 0; i < sp.size(); ++i) {
    if (sp[i] != 0) out.pred_to_ref.push_back(to_ref[i]);
    if (sr[i] != 0) out.ref_to_pred.push_back(to_pred[i]);
  }
  return out;
}

inline double nsd(const SurfaceDistances& d, double tau, const MetricConfig& cfg = {}) {
  if (!(tau > 0.0)) throw ValidationError("nsd tolerance must be > 0");
  if (d.pred_empty && d.ref_empty) return cfg.empty_empty_score;
  if (d.pred_empty || d.ref_empty) return cfg.one_empty_score;
  std::size_t within = 0;
  for (double v : d.pred_to_ref) within += v <= tau;
  for (double v : d.ref_to_pred) within += v <= tau;
  return static_cast<double>(within) / static_cast<double>(d.pred_to_ref.size() + d.ref_to_pred.size());
}

inline double hausdorff(const SurfaceDistances& d, const MetricConfig& cfg = {}) {
  if (d.pred_empty && d.ref_empty) return 0.0;
  if (d.pred_empty || d.ref_empty) return cfg.hd_empty_penalty;
  if (cfg.hd_combine == HdCombine::kPooled) {
    std::vector<double> all = d.pred_to_ref;
    all.insert(all.end(), d.ref_to_pred.begin(), d.ref_to_pred.end());
    return percentile_nearest_rank(std::move(all), cfg.hd_percentile);
  }
  return std::max(percentile_nearest_rank(d.pred_to_ref, cfg.hd_percentile),
                  percentile_nearest_rank(d.ref_to_pred, cfg.hd_percentile));
}

/// Normalized surface distance at tolerance `tau` (same unit as `spacing`).
inline double nsd(const Mask& pred, const Mask& ref, const Spacing& spacing, double tau, const MetricConfig& cfg = {}) {
  if (!(tau > 0.0)) throw ValidationError("nsd tolerance must be > 0");
  return nsd(surface_distances(pred, ref, spacing), tau, cfg);
}

/// Percentile Hausdorff distance (95th by default).
inline double hd95(const Mask& pred, const Mask& ref, const Spacing& spacing, const MetricConfig& cfg = {}) {
  return hausdorff(surface_distances(pred, ref, spacing), cfg);
}

/// 1 wherever the two label maps disagree.
inline Mask error_overlay(const LabelMap& pred, const LabelMap& ref) {
  require_same_geometry(pred.geometry(), ref.geometry(), "prediction and reference");
  Mask out = ref.like<std::uint8_t>();
  for (std::size_t i = 0; i < ref.size(); ++i) out[i] = pred[i] != ref[i] ? 1 : 0;
  return out;
}

}  // namespace toposeg
