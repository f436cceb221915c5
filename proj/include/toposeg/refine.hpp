#pragma once

// Rule-based topology refinement of label maps. The pipeline order is fixed:
// small-component removal, per-region hole filling, then whole-tumor cavity
// filling. Applying it twice gives the same result as applying it once.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "toposeg/error.hpp"
#include "toposeg/geometry.hpp"
#include "toposeg/labels.hpp"
#include "toposeg/volume.hpp"

namespace toposeg {

struct RefineConfig {
  /// Per-region minimum component size in voxels; regions not listed use
  /// `default_min_size`.
  std::map<std::string, std::size_t> min_component_size;
  std::size_t default_min_size = 10;
  /// Regions whose enclosed background is filled; unlisted regions are off.
  std::map<std::string, bool> fill_holes{{"ET", true}, {"NETC", true}, {"SNFH", false}};
  bool enforce_hierarchy = true;

  [[nodiscard]] std::size_t min_size_for(const std::string& region) const {
    const auto it = min_component_size.find(region);
    return it == min_component_size.end() ? default_min_size : it->second;
  }
  [[nodiscard]] bool fill_enabled(const std::string& region) const {
    const auto it = fill_holes.find(region);
    return it != fill_holes.end() && it->second;
  }
};

/// Per region, 26-connected components smaller than the threshold become background.
inline LabelMap remove_small_components(const LabelMap& labels, const RefineConfig& cfg,
                                        const RegionSpec& spec = RegionSpec::brats()) {
  LabelMap out = labels;
  for (const auto& region : spec.regions()) {
    const auto threshold = cfg.min_size_for(region.name);
    if (threshold == 0) continue;
    const auto cc = connected_components(channelize(out, spec, region.name), Connectivity::k26);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto id = cc.ids[i];
      if (id != 0 && cc.sizes[id - 1] < threshold) out[i] = label::kBackground;
    }
  }
  return out;
}

/// For each enabled region, background enclosed by the region mask takes the
/// region's primary label. Other labels inside the cavity are kept.
inline LabelMap fill_region_holes(const LabelMap& labels, const RefineConfig& cfg,
                                  const RegionSpec& spec = RegionSpec::brats()) {
  LabelMap out = labels;
  for (const auto& region : spec.regions()) {
    if (!cfg.fill_enabled(region.name)) continue;
    const Mask cavity = enclosed_background(channelize(out, spec, region.name));
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (cavity[i] != 0 && out[i] == label::kBackground) out[i] = region.primary_label();
    }
  }
  return out;
}

/// Background cavities of the whole tumor (6-connected components not
/// reachable from the border) take the majority label among the tumor voxels
/// 6-adjacent to the cavity; ties go to NETC when it is tied, else to the
/// lowest tied label. Labelled voxels are never changed.
inline LabelMap enforce_hierarchy(const LabelMap& labels) {
  LabelMap out = labels;
  const Mask cavities = enclosed_background(foreground(labels));
  const auto cc = connected_components(cavities, Connectivity::k6);
  if (cc.count() == 0) return out;

  std::vector<std::array<std::size_t, 256>> votes(cc.count());
  for (auto& v : votes) v.fill(0);
  // A tumor voxel adjacent to the same cavity through several faces votes once.
  Volume<std::uint32_t> voted = labels.like<std::uint32_t>();
  const auto faces = neighbor_offsets(Connectivity::k6);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto id = cc.ids[i];
    if (id == 0) continue;
    const auto c = labels.coords(i);
    for (const auto& o : faces) {
      if (!labels.in_bounds(c.x + o[0], c.y + o[1], c.z + o[2])) continue;
      const auto j = labels.index(c.x + o[0], c.y + o[1], c.z + o[2]);
      if (labels[j] == label::kBackground || voted[j] == id) continue;
      voted[j] = id;
      ++votes[id - 1][labels[j]];
    }
  }
  std::vector<std::uint8_t> assign(cc.count(), label::kBackground);
  for (std::size_t k = 0; k < cc.count(); ++k) {
    const auto& v = votes[k];
    const auto best = *std::max_element(v.begin() + 1, v.end());
    if (best == 0) continue;
    if (v[label::kNETC] == best) {
      assign[k] = label::kNETC;
    } else {
      for (std::size_t l = 1; l < v.size(); ++l) {
        if (v[l] == best) {
          assign[k] = static_cast<std::uint8_t>(l);
          break;
        }
      }
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (cc.ids[i] != 0) out[i] = assign[cc.ids[i] - 1];
  }
  return out;
}

/// remove_small_components -> fill_region_holes -> enforce_hierarchy.
inline LabelMap refine(const LabelMap& labels, const RefineConfig& cfg = {},
                       const RegionSpec& spec = RegionSpec::brats()) {
  validate_labels(labels, spec);
  LabelMap out = remove_small_components(labels, cfg, spec);
  out = fill_region_holes(out, cfg, spec);
  if (cfg.enforce_hierarchy) out = enforce_hierarchy(out);
  return out;
}

}  // namespace toposeg
