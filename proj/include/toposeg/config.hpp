#pragma once

// JSON run configuration. Every section is optional; unknown keys are
// rejected so typos do not silently fall back to defaults.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "toposeg/error.hpp"
#include "toposeg/geometry.hpp"
#include "toposeg/labels.hpp"
#include "toposeg/lesionwise.hpp"
#include "toposeg/metrics.hpp"
#include "toposeg/perturb.hpp"
#include "toposeg/refine.hpp"

namespace toposeg {

inline constexpr const char* kDefaultPairingRegex = R"(BraTS-[A-Za-z]+-\d{5}-\d{3})";

struct Config {
  RegionSpec regions = RegionSpec::brats();
  ClassTable classes;
  MetricConfig metrics;
  LesionwiseConfig lesionwise;
  PerturbConfig perturb;
  RefineConfig refine;
  std::string pairing_regex = kDefaultPairingRegex;
  /// Rewrite label 4 to 3 on read (older BraTS releases).
  bool remap_legacy_labels = false;
};

namespace detail {

using json = nlohmann::ordered_json;

inline void check_keys(const json& j, const std::string& section, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ValidationError("config section '" + section + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ValidationError("unknown key '" + k + "' in config section '" + section + "'");
  }
}

template <typename T>
void read_key(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("config " + section + "." + key + ": " + e.what());
  }
}

inline DistanceUnit parse_unit(const std::string& s) {
  if (s == "mm") return DistanceUnit::kMillimeter;
  if (s == "voxel") return DistanceUnit::kVoxel;
  throw ValidationError("unknown distance unit '" + s + "' (expected mm or voxel)");
}

inline const char* to_string(DistanceUnit u) { return u == DistanceUnit::kVoxel ? "voxel" : "mm"; }

inline HdCombine parse_hd_combine(const std::string& s) {
  if (s == "max") return HdCombine::kMaxOfDirected;
  if (s == "pooled") return HdCombine::kPooled;
  throw ValidationError("unknown hd_combine '" + s + "' (expected max or pooled)");
}

inline const char* to_string(HdCombine c) { return c == HdCombine::kPooled ? "pooled" : "max"; }

}  // namespace detail

inline Config config_from_json(const nlohmann::ordered_json& j) {
  using detail::read_key;
  Config c;
  detail::check_keys(j, "root",
                     {"regions", "classes", "metrics", "lesionwise", "perturb", "refine", "pairing_regex",
                      "remap_legacy_labels"});
  if (j.contains("regions")) {
    // Either {"ET": [3], ...} in file order or [{"name": "ET", "labels": [3]}, ...].
    const auto& r = j.at("regions");
    std::vector<Region> regions;
    auto add = [&](const std::string& name, const detail::json& labels_json) {
      Region reg;
      reg.name = name;
      std::vector<int> labels;
      try {
        labels = labels_json.get<std::vector<int>>();
      } catch (const detail::json::exception& e) {
        throw ValidationError("config regions." + name + ": " + e.what());
      }
      for (int l : labels) {
        if (l < 0 || l > 255) throw ValidationError("region label " + std::to_string(l) + " out of range");
        reg.labels.insert(static_cast<std::uint8_t>(l));
      }
      regions.push_back(std::move(reg));
    };
    if (r.is_object()) {
      for (const auto& [name, labels] : r.items()) add(name, labels);
    } else if (r.is_array()) {
      for (const auto& item : r) {
        detail::check_keys(item, "regions[]", {"name", "labels"});
        if (!item.contains("name") || !item.contains("labels")) throw ValidationError("config regions[] needs name and labels");
        std::string name;
        read_key(item, "name", name, "regions[]");
        add(name, item.at("labels"));
      }
    } else {
      throw ValidationError("config 'regions' must be an object or an array");
    }
    c.regions = RegionSpec(std::move(regions));
  }
  if (j.contains("classes")) {
    std::vector<int> labels;
    read_key(j, "classes", labels, "root");
    c.classes.labels.clear();
    for (int l : labels) {
      if (l < 0 || l > 255) throw ValidationError("class label " + std::to_string(l) + " out of range");
      c.classes.labels.push_back(static_cast<std::uint8_t>(l));
    }
  }
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    const std::string s = "metrics";
    detail::check_keys(m, s,
                       {"nsd_tolerances", "hd_percentile", "empty_empty_score", "one_empty_score",
                        "hd_empty_penalty", "unit", "hd_combine"});
    read_key(m, "nsd_tolerances", c.metrics.nsd_tolerances, s);
    read_key(m, "hd_percentile", c.metrics.hd_percentile, s);
    read_key(m, "empty_empty_score", c.metrics.empty_empty_score, s);
    read_key(m, "one_empty_score", c.metrics.one_empty_score, s);
    read_key(m, "hd_empty_penalty", c.metrics.hd_empty_penalty, s);
    std::string unit = detail::to_string(c.metrics.unit);
    read_key(m, "unit", unit, s);
    c.metrics.unit = detail::parse_unit(unit);
    std::string combine = detail::to_string(c.metrics.hd_combine);
    read_key(m, "hd_combine", combine, s);
    c.metrics.hd_combine = detail::parse_hd_combine(combine);
  }
  c.metrics.validate();
  if (j.contains("lesionwise")) {
    const auto& l = j.at("lesionwise");
    const std::string s = "lesionwise";
    detail::check_keys(l, s, {"connectivity", "dilation_iters", "min_lesion_size"});
    int conn = static_cast<int>(c.lesionwise.connectivity);
    read_key(l, "connectivity", conn, s);
    c.lesionwise.connectivity = connectivity_from_int(conn);
    read_key(l, "dilation_iters", c.lesionwise.dilation_iters, s);
    read_key(l, "min_lesion_size", c.lesionwise.min_lesion_size, s);
  }
  c.lesionwise.validate();
  if (j.contains("perturb")) {
    const auto& p = j.at("perturb");
    const std::string s = "perturb";
    detail::check_keys(p, s, {"degree", "fraction", "mode_weights", "mask_shape", "master_seed"});
    read_key(p, "degree", c.perturb.degree, s);
    read_key(p, "fraction", c.perturb.fraction, s);
    read_key(p, "master_seed", c.perturb.master_seed, s);
    if (p.contains("mode_weights")) {
      const auto& w = p.at("mode_weights");
      detail::check_keys(w, "perturb.mode_weights", {"erase", "insert", "swap"});
      read_key(w, "erase", c.perturb.erase_weight, s);
      read_key(w, "insert", c.perturb.insert_weight, s);
      read_key(w, "swap", c.perturb.swap_weight, s);
    }
    std::string shape = to_string(c.perturb.mask_shape);
    read_key(p, "mask_shape", shape, s);
    c.perturb.mask_shape = parse_mask_shape(shape);
  }
  c.perturb.validate();
  // Built-in hole-filling defaults only apply to regions that are defined.
  std::erase_if(c.refine.fill_holes, [&](const auto& kv) { return !c.regions.has_region(kv.first); });
  if (j.contains("refine")) {
    const auto& r = j.at("refine");
    const std::string s = "refine";
    detail::check_keys(r, s, {"min_component_size", "default_min_size", "fill_holes", "enforce_hierarchy"});
    if (r.contains("min_component_size")) {
      const auto& m = r.at("min_component_size");
      if (!m.is_object()) throw ValidationError("config refine.min_component_size must map region -> size");
      for (const auto& [name, v] : m.items()) {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
          throw ValidationError("config refine.min_component_size." + name + " must be an integer >= 0");
        }
        c.refine.min_component_size[name] = v.get<std::size_t>();
      }
    }
    if (r.contains("default_min_size")) {
      const auto& v = r.at("default_min_size");
      if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ValidationError("config refine.default_min_size must be an integer >= 0");
      }
      c.refine.default_min_size = v.get<std::size_t>();
    }
    if (r.contains("fill_holes")) {
      const auto& f = r.at("fill_holes");
      if (!f.is_object()) throw ValidationError("config refine.fill_holes must map region -> bool");
      for (const auto& [name, v] : f.items()) {
        if (!v.is_boolean()) throw ValidationError("config refine.fill_holes." + name + " must be a boolean");
        c.refine.fill_holes[name] = v.get<bool>();
      }
    }
    read_key(r, "enforce_hierarchy", c.refine.enforce_hierarchy, s);
  }
  for (const auto& [name, size] : c.refine.min_component_size) {
    if (!c.regions.has_region(name)) throw ValidationError("refine.min_component_size names unknown region '" + name + "'");
  }
  for (const auto& [name, on] : c.refine.fill_holes) {
    if (on && !c.regions.has_region(name)) throw ValidationError("refine.fill_holes enables unknown region '" + name + "'");
  }
  read_key(j, "pairing_regex", c.pairing_regex, "root");
  read_key(j, "remap_legacy_labels", c.remap_legacy_labels, "root");
  return c;
}

inline nlohmann::ordered_json to_json(const Config& c) {
  nlohmann::ordered_json j;
  j["regions"] = nlohmann::ordered_json::array();
  for (const auto& r : c.regions.regions()) {
    nlohmann::ordered_json item;
    item["name"] = r.name;
    item["labels"] = std::vector<int>(r.labels.begin(), r.labels.end());
    j["regions"].push_back(item);
  }
  j["classes"] = std::vector<int>(c.classes.labels.begin(), c.classes.labels.end());
  j["metrics"] = {{"nsd_tolerances", c.metrics.nsd_tolerances},
                  {"hd_percentile", c.metrics.hd_percentile},
                  {"empty_empty_score", c.metrics.empty_empty_score},
                  {"one_empty_score", c.metrics.one_empty_score},
                  {"hd_empty_penalty", c.metrics.hd_empty_penalty},
                  {"unit", detail::to_string(c.metrics.unit)},
                  {"hd_combine", detail::to_string(c.metrics.hd_combine)}};
  j["lesionwise"] = {{"connectivity", static_cast<int>(c.lesionwise.connectivity)},
                     {"dilation_iters", c.lesionwise.dilation_iters},
                     {"min_lesion_size", c.lesionwise.min_lesion_size}};
  j["perturb"] = {{"degree", c.perturb.degree},
                  {"fraction", c.perturb.fraction},
                  {"mode_weights",
                   {{"erase", c.perturb.erase_weight},
                    {"insert", c.perturb.insert_weight},
                    {"swap", c.perturb.swap_weight}}},
                  {"mask_shape", to_string(c.perturb.mask_shape)},
                  {"master_seed", c.perturb.master_seed}};
  nlohmann::ordered_json sizes = nlohmann::ordered_json::object();
  for (const auto& [k, v] : c.refine.min_component_size) sizes[k] = v;
  nlohmann::ordered_json fills = nlohmann::ordered_json::object();
  for (const auto& [k, v] : c.refine.fill_holes) fills[k] = v;
  j["refine"] = {{"min_component_size", sizes},
                 {"default_min_size", c.refine.default_min_size},
                 {"fill_holes", fills},
                 {"enforce_hierarchy", c.refine.enforce_hierarchy}};
  j["pairing_regex"] = c.pairing_regex;
  j["remap_legacy_labels"] = c.remap_legacy_labels;
  return j;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::ordered_json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace toposeg
