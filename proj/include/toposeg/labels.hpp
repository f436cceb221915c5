#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "toposeg/error.hpp"
#include "toposeg/volume.hpp"

namespace toposeg {

/// Label integers of the current BraTS convention.
namespace label {
inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kNETC = 1;
inline constexpr std::uint8_t kSNFH = 2;
inline constexpr std::uint8_t kET = 3;
inline constexpr std::uint8_t kLegacyET = 4;
}  // namespace label

struct Region {
  std::string name;
  std::set<std::uint8_t> labels;

  /// Label written when a rule adds voxels to this region.
  [[nodiscard]] std::uint8_t primary_label() const { return *labels.begin(); }
  [[nodiscard]] bool contains(std::uint8_t v) const { return labels.count(v) != 0; }
};

/// Ordered mapping from region names to label sets. Background is 0 and
/// belongs to no region.
class RegionSpec {
 public:
  RegionSpec() = default;

  explicit RegionSpec(std::vector<Region> regions) : regions_(std::move(regions)) { validate(); }

  /// SNFH={2}, NETC={1}, ET={3} in table order, optionally followed by the
  /// TC={1,3} and WT={1,2,3} composites.
  static RegionSpec brats(bool with_composites = false) {
    std::vector<Region> r{{"SNFH", {label::kSNFH}}, {"NETC", {label::kNETC}}, {"ET", {label::kET}}};
    if (with_composites) {
      r.push_back({"TC", {label::kNETC, label::kET}});
      r.push_back({"WT", {label::kNETC, label::kSNFH, label::kET}});
    }
    return RegionSpec(std::move(r));
  }

  [[nodiscard]] const std::vector<Region>& regions() const { return regions_; }

  [[nodiscard]] const Region& region(const std::string& name) const {
    for (const auto& r : regions_) {
      if (r.name == name) return r;
    }
    throw ValidationError("unknown region '" + name + "'");
  }

  [[nodiscard]] bool has_region(const std::string& name) const {
    return std::any_of(regions_.begin(), regions_.end(), [&](const Region& r) { return r.name == name; });
  }

  /// {0} plus the union of all region label sets.
  [[nodiscard]] std::set<std::uint8_t> allowed_values() const {
    std::set<std::uint8_t> out{label::kBackground};
    for (const auto& r : regions_) out.insert(r.labels.begin(), r.labels.end());
    return out;
  }

  /// Non-background labels, ascending.
  [[nodiscard]] std::vector<std::uint8_t> tumor_labels() const {
    auto s = allowed_values();
    s.erase(label::kBackground);
    return {s.begin(), s.end()};
  }

 private:
  void validate() const {
    std::set<std::string> names;
    for (const auto& r : regions_) {
      if (r.name.empty()) throw ValidationError("region with empty name");
      if (!names.insert(r.name).second) throw ValidationError("duplicate region name '" + r.name + "'");
      if (r.labels.empty()) throw ValidationError("region '" + r.name + "' has an empty label set");
      if (r.contains(label::kBackground)) throw ValidationError("region '" + r.name + "' contains background label 0");
    }
  }

  std::vector<Region> regions_;
};

/// Per-class probability grids (class 0 = background) sharing one geometry.
struct ProbabilityVolume {
  std::vector<Volume<float>> channels;

  [[nodiscard]] std::size_t class_count() const { return channels.size(); }
  [[nodiscard]] const Geometry& geometry() const { return channels.front().geometry(); }
  [[nodiscard]] std::size_t voxel_count() const { return channels.empty() ? 0 : channels.front().size(); }
};

/// Class index -> label integer. Default order (bg, NETC, SNFH, ET).
struct ClassTable {
  std::vector<std::uint8_t> labels{label::kBackground, label::kNETC, label::kSNFH, label::kET};
};

/// Throws unless every channel lies in [0,1] and per-voxel sums are within
/// `sum_tol` of 1.
inline void validate_probabilities(const ProbabilityVolume& probs, double sum_tol = 1e-3) {
  if (probs.channels.empty()) throw ValidationError("probability volume has no channels");
  const auto& g = probs.geometry();
  for (const auto& ch : probs.channels) require_same_geometry(g, ch.geometry(), "probability channels");
  const auto n = probs.voxel_count();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (const auto& ch : probs.channels) {
      const float p = ch[i];
      if (!(p >= 0.0F && p <= 1.0F)) {
        throw ValidationError("probability " + std::to_string(p) + " outside [0,1] at voxel " + std::to_string(i));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > sum_tol) {
      throw ValidationError("channel sum " + std::to_string(sum) + " at voxel " + std::to_string(i) + " is not 1");
    }
  }
}

/// 1 where the label belongs to `region_name`.
inline Mask channelize(const LabelMap& labels, const RegionSpec& spec, const std::string& region_name) {
  const auto& region = spec.region(region_name);
  const auto allowed = spec.allowed_values();
  Mask out = labels.like<std::uint8_t>();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto v = labels[i];
    if (allowed.count(v) == 0) {
      throw LabelError("label " + std::to_string(v) + " at voxel " + std::to_string(i) + " is outside the region spec");
    }
    out[i] = region.contains(v) ? 1 : 0;
  }
  return out;
}

/// Non-background voxels.
inline Mask foreground(const LabelMap& labels) {
  Mask out = labels.like<std::uint8_t>();
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] != label::kBackground ? 1 : 0;
  return out;
}

/// Per-voxel argmax over channels, ties to the lower class index.
inline LabelMap argmax_labels(const ProbabilityVolume& probs, const ClassTable& table = {}) {
  if (probs.channels.size() != table.labels.size()) {
    throw ValidationError("probability volume has " + std::to_string(probs.channels.size()) +
                          " channels, class table has " + std::to_string(table.labels.size()));
  }
  LabelMap out = probs.channels.front().like<std::uint8_t>();
  const auto n = probs.voxel_count();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    float best_p = probs.channels[0][i];
    for (std::size_t c = 1; c < probs.channels.size(); ++c) {
      if (probs.channels[c][i] > best_p) {
        best_p = probs.channels[c][i];
        best = c;
      }
    }
    out[i] = table.labels[best];
  }
  return out;
}

inline ProbabilityVolume one_hot(const LabelMap& labels, const ClassTable& table = {}) {
  ProbabilityVolume out;
  for (std::size_t c = 0; c < table.labels.size(); ++c) out.channels.push_back(labels.like<float>());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = std::find(table.labels.begin(), table.labels.end(), labels[i]);
    if (it == table.labels.end()) throw LabelError("label " + std::to_string(labels[i]) + " not in class table");
    out.channels[static_cast<std::size_t>(it - table.labels.begin())][i] = 1.0F;
  }
  return out;
}

/// Passes iff every voxel value is in {0} ∪ the configured labels ({0,1,2,3} for
/// the default regions). The error lists each offending value with one coordinate.
inline void validate_labels(const LabelMap& labels, const RegionSpec& spec = RegionSpec::brats()) {
  const auto allowed = spec.allowed_values();
  std::map<int, Index3> bad;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (allowed.count(labels[i]) == 0 && bad.count(labels[i]) == 0) bad.emplace(labels[i], labels.coords(i));
  }
  if (bad.empty()) return;
  std::ostringstream os;
  os << "invalid label values:";
  for (const auto& [value, at] : bad) os << " " << value << " at (" << at.x << "," << at.y << "," << at.z << ");";
  throw LabelError(os.str());
}

/// Maps the legacy encoding (4 = ET) onto the current one (3 = ET).
inline LabelMap remap_legacy_labels(LabelMap labels) {
  for (auto& v : labels) {
    if (v == label::kLegacyET) v = label::kET;
  }
  return labels;
}

}  // namespace toposeg
