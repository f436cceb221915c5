#pragma once

// Per-case evaluation, aggregation over cases, and the CSV / JSON / Markdown
// summary formats.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <system_error>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "toposeg/config.hpp"
#include "toposeg/error.hpp"
#include "toposeg/labels.hpp"
#include "toposeg/lesionwise.hpp"
#include "toposeg/metrics.hpp"
#include "toposeg/nifti.hpp"
#include "toposeg/parallel.hpp"

namespace toposeg {

inline constexpr const char* kLegacyMode = "legacy";
inline constexpr const char* kLesionMode = "lesion";

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw ValidationError("not a number: '" + s + "'");
  return v;
}

/// "nsd@0.5", "nsd@1.0", "nsd@2.25".
inline std::string nsd_metric_name(double tau) {
  std::string s = format_double(tau);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return "nsd@" + s;
}

/// "hd95" for the default percentile.
inline std::string hd_metric_name(double percentile) { return "hd" + format_double(percentile); }

struct CellKey {
  std::string mode;
  std::string metric;
  std::string region;

  friend bool operator==(const CellKey&, const CellKey&) = default;
  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

inline std::string to_string(const CellKey& k) { return k.mode + "/" + k.metric + "/" + k.region; }

/// Table layout: metric, then mode (legacy before lesion), then region in definition order.
inline std::vector<CellKey> table_columns(const RegionSpec& regions, const MetricConfig& metrics) {
  std::vector<std::string> names{"dice"};
  for (double t : metrics.nsd_tolerances) names.push_back(nsd_metric_name(t));
  names.push_back(hd_metric_name(metrics.hd_percentile));
  std::vector<CellKey> out;
  for (const auto& metric : names) {
    for (const char* mode : {kLegacyMode, kLesionMode}) {
      for (const auto& r : regions.regions()) out.push_back({mode, metric, r.name});
    }
  }
  return out;
}

struct LesionCounts {
  std::size_t ref_lesions = 0;
  std::size_t pred_components = 0;
  std::size_t detected = 0;  // scored lesions with at least one attached component
  std::size_t ignored = 0;
  std::size_t false_positives = 0;

  friend bool operator==(const LesionCounts&, const LesionCounts&) = default;
};

struct CaseReport {
  std::string model;
  std::string case_id;
  std::vector<CellKey> columns;
  std::vector<double> values;  // parallel to columns
  std::map<std::string, LesionCounts> lesions;
  double seconds = 0.0;

  [[nodiscard]] double value(const CellKey& key) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == key) return values[i];
    }
    throw ValidationError("case " + case_id + " has no cell " + to_string(key));
  }
};

/// Runs `fn`, prefixing any library error message with `context` and keeping its type.
template <typename Fn>
auto with_context(const std::string& context, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const nifti::NiftiError& e) {
    throw e.with_context(context);
  } catch (const GeometryError& e) {
    throw GeometryError(context + ": " + e.what());
  } catch (const LabelError& e) {
    throw LabelError(context + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(context + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(context + ": " + e.what());
  }
}

/// Every configured metric for every region in both modes, from in-memory label maps.
inline CaseReport evaluate_labels(const LabelMap& pred, const LabelMap& ref, const Config& cfg,
                                  const std::string& case_id, const std::string& model = "") {
  const auto start = std::chrono::steady_clock::now();
  return with_context("case " + case_id, [&] {
    require_same_geometry(pred.geometry(), ref.geometry(), "prediction and reference");
    validate_labels(pred, cfg.regions);
    validate_labels(ref, cfg.regions);
    cfg.metrics.validate();
    CaseReport rep;
    rep.model = model;
    rep.case_id = case_id;
    rep.columns = table_columns(cfg.regions, cfg.metrics);
    rep.values.assign(rep.columns.size(), 0.0);
    const auto& taus = cfg.metrics.nsd_tolerances;
    const Spacing spacing = cfg.metrics.effective_spacing(ref.spacing());
    const auto hd_name = hd_metric_name(cfg.metrics.hd_percentile);

    std::map<CellKey, double> cells;
    for (const auto& region : cfg.regions.regions()) {
      const Mask p = channelize(pred, cfg.regions, region.name);
      const Mask r = channelize(ref, cfg.regions, region.name);

      cells[{kLegacyMode, "dice", region.name}] = dice(p, r, cfg.metrics);
      const auto d = surface_distances(p, r, spacing);
      for (double t : taus) cells[{kLegacyMode, nsd_metric_name(t), region.name}] = nsd(d, t, cfg.metrics);
      cells[{kLegacyMode, hd_name, region.name}] = hausdorff(d, cfg.metrics);

      const auto m = match_lesions(p, r, cfg.lesionwise);
      const auto s = lesionwise_scores(m, cfg.metrics);
      cells[{kLesionMode, "dice", region.name}] = detail::mean_or(s.dice, cfg.metrics.empty_empty_score);
      for (std::size_t t = 0; t < taus.size(); ++t) {
        cells[{kLesionMode, nsd_metric_name(taus[t]), region.name}] =
            detail::mean_or(s.nsd[t], cfg.metrics.empty_empty_score);
      }
      cells[{kLesionMode, hd_name, region.name}] = detail::mean_or(s.hd, 0.0);

      LesionCounts lc;
      lc.ref_lesions = m.ref.count();
      lc.pred_components = m.pred.count();
      lc.ignored = static_cast<std::size_t>(std::count(m.ignored.begin(), m.ignored.end(), true));
      for (std::size_t k = 0; k < m.matched.size(); ++k) lc.detected += !m.ignored[k] && !m.matched[k].empty();
      lc.false_positives = m.false_positives.size();
      rep.lesions[region.name] = lc;
    }
    for (std::size_t i = 0; i < rep.columns.size(); ++i) rep.values[i] = cells.at(rep.columns[i]);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
  });
}

inline LabelMap load_case_labels(const std::filesystem::path& path, const Config& cfg) {
  LabelMap labels = nifti::read_labels(path);
  if (cfg.remap_legacy_labels) labels = remap_legacy_labels(std::move(labels));
  return labels;
}

inline CaseReport evaluate_case(const std::filesystem::path& pred_path, const std::filesystem::path& ref_path,
                                const Config& cfg, const std::string& case_id, const std::string& model = "") {
  const auto [pred, ref] = with_context("case " + case_id, [&] {
    return std::pair{load_case_labels(pred_path, cfg), load_case_labels(ref_path, cfg)};
  });
  return evaluate_labels(pred, ref, cfg, case_id, model);
}

// ---------------------------------------------------------------------------
// Aggregation

struct SummaryTable {
  std::string model;
  std::size_t case_count = 0;
  std::vector<CellKey> columns;
  std::vector<std::optional<double>> values;  // nullopt renders as n/a

  friend bool operator==(const SummaryTable&, const SummaryTable&) = default;
};

/// Unweighted per-cell mean over cases, summed in case id order.
inline SummaryTable aggregate(std::vector<CaseReport> reports, const std::string& model,
                              const std::vector<CellKey>& columns) {
  std::sort(reports.begin(), reports.end(), [](const CaseReport& a, const CaseReport& b) { return a.case_id < b.case_id; });
  SummaryTable t;
  t.model = model;
  t.case_count = reports.size();
  t.columns = columns;
  t.values.assign(columns.size(), std::nullopt);
  for (const auto& r : reports) {
    if (r.columns != columns) {
      throw ValidationError("case " + r.case_id + " was evaluated with a different metric configuration");
    }
  }
  if (reports.empty()) return t;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    double sum = 0.0;
    for (const auto& r : reports) sum += r.values[c];
    t.values[c] = sum / static_cast<double>(reports.size());
  }
  return t;
}

inline SummaryTable aggregate(const std::vector<CaseReport>& reports, const std::string& model, const Config& cfg) {
  return aggregate(reports, model, table_columns(cfg.regions, cfg.metrics));
}

// ---------------------------------------------------------------------------
// File output

/// Writes through a temporary sibling and renames, so a failed run never
/// leaves a partial file behind.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write '" + path.string() + "'");
    os << text;
    os.flush();
    if (!os) {
      std::filesystem::remove(tmp, ec);
      throw IoError("short write to '" + path.string() + "'");
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into '" + path.string() + "'");
  }
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void check_model_name(const std::string& model) {
  if (model.find_first_of(",\"\n\r") != std::string::npos) {
    throw ValidationError("model name '" + model + "' may not contain commas, quotes or newlines");
  }
}

inline constexpr const char* kCsvHeader = "model,mode,metric,region,value";

inline std::string summary_csv(const std::vector<SummaryTable>& tables) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& t : tables) {
    check_model_name(t.model);
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      const auto& k = t.columns[c];
      out += t.model + "," + k.mode + "," + k.metric + "," + k.region + ",";
      out += t.values[c] ? format_double(*t.values[c]) : std::string("n/a");
      out += "\n";
    }
  }
  return out;
}

/// Inverse of summary_csv. Case counts are not part of the CSV and come back as 0.
inline std::vector<SummaryTable> parse_summary_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw ValidationError("summary csv: missing header");
  std::vector<SummaryTable> tables;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (f.size() != 5) throw ValidationError("summary csv line " + std::to_string(lineno) + ": expected 5 fields");
    if (tables.empty() || tables.back().model != f[0]) tables.push_back(SummaryTable{f[0], 0, {}, {}});
    auto& t = tables.back();
    t.columns.push_back({f[1], f[2], f[3]});
    t.values.push_back(f[4] == "n/a" ? std::nullopt : std::optional<double>(parse_double(f[4])));
  }
  return tables;
}

inline nlohmann::ordered_json to_json(const SummaryTable& t) {
  nlohmann::ordered_json j;
  j["model"] = t.model;
  j["case_count"] = t.case_count;
  auto cells = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    nlohmann::ordered_json cell;
    cell["mode"] = t.columns[c].mode;
    cell["metric"] = t.columns[c].metric;
    cell["region"] = t.columns[c].region;
    cell["value"] = t.values[c] ? nlohmann::ordered_json(*t.values[c]) : nlohmann::ordered_json("n/a");
    cells.push_back(cell);
  }
  j["cells"] = cells;
  return j;
}

inline SummaryTable summary_from_json(const nlohmann::json& j) {
  try {
    SummaryTable t;
    t.model = j.at("model").get<std::string>();
    t.case_count = j.at("case_count").get<std::size_t>();
    for (const auto& cell : j.at("cells")) {
      t.columns.push_back({cell.at("mode").get<std::string>(), cell.at("metric").get<std::string>(),
                           cell.at("region").get<std::string>()});
      const auto& v = cell.at("value");
      if (v.is_string()) {
        if (v.get<std::string>() != "n/a") throw ValidationError("summary json: bad cell value");
        t.values.push_back(std::nullopt);
      } else {
        t.values.push_back(v.get<double>());
      }
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("summary json: ") + e.what());
  }
}

struct UnpairedFile {
  std::string path;
  std::string reason;

  friend bool operator==(const UnpairedFile&, const UnpairedFile&) = default;
};

inline std::string summary_json(const std::vector<SummaryTable>& tables, const std::vector<UnpairedFile>& unpaired = {}) {
  nlohmann::ordered_json j;
  j["tables"] = nlohmann::ordered_json::array();
  for (const auto& t : tables) j["tables"].push_back(to_json(t));
  j["unpaired"] = nlohmann::ordered_json::array();
  for (const auto& u : unpaired) j["unpaired"].push_back({{"path", u.path}, {"reason", u.reason}});
  return j.dump(2) + "\n";
}

inline std::vector<SummaryTable> parse_summary_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("summary json: ") + e.what());
  }
  if (!j.contains("tables") || !j.at("tables").is_array()) throw ValidationError("summary json: missing tables");
  std::vector<SummaryTable> out;
  for (const auto& t : j.at("tables")) out.push_back(summary_from_json(t));
  return out;
}

namespace detail {

inline std::string fixed3(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", *v);
  return buf;
}

}  // namespace detail

/// One Markdown table per metric: rows are models, columns are the legacy
/// regions followed by the lesion-wise regions. Cells have 3 decimals.
inline std::string summary_markdown(const std::vector<SummaryTable>& tables) {
  std::string out;
  if (tables.empty()) return out;
  std::vector<std::string> metrics;
  for (const auto& k : tables.front().columns) {
    if (std::find(metrics.begin(), metrics.end(), k.metric) == metrics.end()) metrics.push_back(k.metric);
  }
  for (const auto& metric : metrics) {
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < tables.front().columns.size(); ++c) {
      if (tables.front().columns[c].metric == metric) cols.push_back(c);
    }
    out += "### " + metric + "\n\n| Model | n |";
    for (auto c : cols) {
      const auto& k = tables.front().columns[c];
      out += std::string(" ") + (k.mode == kLegacyMode ? "Legacy" : "Lesion") + " " + k.region + " |";
    }
    out += "\n|---|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) out += "---|";
    out += "\n";
    for (const auto& t : tables) {
      out += "| " + t.model + " | " + std::to_string(t.case_count) + " |";
      for (auto c : cols) {
        std::optional<double> v;
        for (std::size_t i = 0; i < t.columns.size(); ++i) {
          if (t.columns[i] == tables.front().columns[c]) v = t.values[i];
        }
        out += " " + detail::fixed3(v) + " |";
      }
      out += "\n";
    }
    out += "\n";
  }
  return out;
}

inline nlohmann::ordered_json to_json(const CaseReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["case_id"] = r.case_id;
  auto cells = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < r.columns.size(); ++c) {
    cells.push_back({{"mode", r.columns[c].mode},
                     {"metric", r.columns[c].metric},
                     {"region", r.columns[c].region},
                     {"value", r.values[c]}});
  }
  j["cells"] = cells;
  nlohmann::ordered_json lesions = nlohmann::ordered_json::object();
  for (const auto& [region, lc] : r.lesions) {
    lesions[region] = {{"ref_lesions", lc.ref_lesions},
                       {"pred_components", lc.pred_components},
                       {"detected", lc.detected},
                       {"ignored", lc.ignored},
                       {"false_positives", lc.false_positives}};
  }
  j["lesions"] = lesions;
  j["seconds"] = r.seconds;
  return j;
}

inline CaseReport case_report_from_json(const nlohmann::json& j) {
  try {
    CaseReport r;
    r.model = j.at("model").get<std::string>();
    r.case_id = j.at("case_id").get<std::string>();
    for (const auto& cell : j.at("cells")) {
      r.columns.push_back({cell.at("mode").get<std::string>(), cell.at("metric").get<std::string>(),
                           cell.at("region").get<std::string>()});
      r.values.push_back(cell.at("value").get<double>());
    }
    for (const auto& [region, lc] : j.at("lesions").items()) {
      r.lesions[region] = {lc.at("ref_lesions").get<std::size_t>(), lc.at("pred_components").get<std::size_t>(),
                           lc.at("detected").get<std::size_t>(), lc.at("ignored").get<std::size_t>(),
                           lc.at("false_positives").get<std::size_t>()};
    }
    r.seconds = j.value("seconds", 0.0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("case report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Case discovery

inline bool is_nifti_path(const std::filesystem::path& p) {
  const auto s = p.filename().string();
  return nifti::detail::has_suffix(s, ".nii") || nifti::detail::has_suffix(s, ".nii.gz");
}

struct CasePair {
  std::string case_id;
  std::filesystem::path pred;
  std::filesystem::path ref;
};

struct Discovery {
  std::vector<CasePair> pairs;  // sorted by case id
  std::vector<UnpairedFile> unpaired;
};

inline std::map<std::string, std::filesystem::path> index_cases(const std::filesystem::path& dir, const std::regex& re,
                                                               std::vector<UnpairedFile>& unpaired) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("not a directory: '" + dir.string() + "'");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && is_nifti_path(entry.path())) files.push_back(entry.path());
  }
  if (ec) throw IoError("cannot list '" + dir.string() + "'");
  std::sort(files.begin(), files.end());
  std::map<std::string, std::filesystem::path> out;
  for (const auto& f : files) {
    std::smatch m;
    const auto name = f.filename().string();
    if (!std::regex_search(name, m, re)) {
      unpaired.push_back({f.string(), "no case id in file name"});
      continue;
    }
    const auto [it, inserted] = out.emplace(m.str(0), f);
    if (!inserted) {
      throw ValidationError("case id " + m.str(0) + " matches both '" + it->second.string() + "' and '" + f.string() + "'");
    }
  }
  return out;
}

/// Pairs prediction and reference files by the first match of `pattern` in
/// each file name. Files without a partner are listed, not dropped.
inline Discovery discover_cases(const std::filesystem::path& pred_dir, const std::filesystem::path& ref_dir,
                                const std::string& pattern) {
  std::regex re;
  try {
    re = std::regex(pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw ValidationError("bad pairing regex '" + pattern + "': " + e.what());
  }
  Discovery d;
  const auto preds = index_cases(pred_dir, re, d.unpaired);
  const auto refs = index_cases(ref_dir, re, d.unpaired);
  for (const auto& [id, p] : preds) {
    const auto it = refs.find(id);
    if (it == refs.end()) {
      d.unpaired.push_back({p.string(), "no reference for case " + id});
    } else {
      d.pairs.push_back({id, p, it->second});
    }
  }
  for (const auto& [id, r] : refs) {
    if (!preds.count(id)) d.unpaired.push_back({r.string(), "no prediction for case " + id});
  }
  return d;
}

/// Evaluates every pair concurrently; the result is sorted by case id.
inline std::vector<CaseReport> evaluate_all(const std::vector<CasePair>& pairs, const Config& cfg,
                                            const std::string& model, unsigned threads = 1) {
  std::vector<CaseReport> out(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    out[i] = evaluate_case(pairs[i].pred, pairs[i].ref, cfg, pairs[i].case_id, model);
  });
  std::sort(out.begin(), out.end(), [](const CaseReport& a, const CaseReport& b) { return a.case_id < b.case_id; });
  return out;
}

}  // namespace toposeg
