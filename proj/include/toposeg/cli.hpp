#pragma once

// Command-line front end. Exit status: 0 success, 1 validation or usage
// error, 2 I/O error (including a perturbation run that skipped pairs).

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "toposeg/config.hpp"
#include "toposeg/error.hpp"
#include "toposeg/fusion.hpp"
#include "toposeg/labels.hpp"
#include "toposeg/metrics.hpp"
#include "toposeg/nifti.hpp"
#include "toposeg/perturb.hpp"
#include "toposeg/refine.hpp"
#include "toposeg/report.hpp"

namespace toposeg::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string output_dir = ".";
};

inline Config load_run_config(const GlobalOptions& g) {
  Config cfg = g.config_path.empty() ? Config{} : load_config(g.config_path);
  if (g.seed) cfg.perturb.master_seed = *g.seed;
  return cfg;
}

inline void write_summaries(const fs::path& dir, const std::vector<SummaryTable>& tables,
                            const std::vector<UnpairedFile>& unpaired) {
  // Render everything first so a formatting error leaves no file behind.
  const auto csv = summary_csv(tables);
  const auto json = summary_json(tables, unpaired);
  const auto md = summary_markdown(tables);
  write_text_atomic(dir / "summary.csv", csv);
  write_text_atomic(dir / "summary.json", json);
  write_text_atomic(dir / "summary.md", md);
}

inline void report_unpaired(const std::vector<UnpairedFile>& unpaired, std::ostream& err) {
  for (const auto& u : unpaired) err << "unpaired: " << u.path << " (" << u.reason << ")\n";
}

inline int run_eval(const GlobalOptions& g, const std::string& pred_dir, const std::string& ref_dir,
                    const std::string& model, std::ostream& out, std::ostream& err) {
  const Config cfg = load_run_config(g);
  check_model_name(model);
  const auto found = discover_cases(pred_dir, ref_dir, cfg.pairing_regex);
  report_unpaired(found.unpaired, err);
  const auto reports = evaluate_all(found.pairs, cfg, model, g.threads);
  const auto table = aggregate(reports, model, cfg);

  std::vector<std::pair<fs::path, std::string>> case_files;
  for (const auto& r : reports) {
    case_files.emplace_back(fs::path(g.output_dir) / "reports" / (model + "__" + r.case_id + ".json"),
                            to_json(r).dump(2) + "\n");
  }
  for (const auto& [path, text] : case_files) write_text_atomic(path, text);
  write_summaries(g.output_dir, {table}, found.unpaired);
  out << "evaluated " << reports.size() << " case(s) for model " << model << "; summary in "
      << (fs::path(g.output_dir) / "summary.csv").string() << "\n";
  return kExitOk;
}

inline int run_fuse(const GlobalOptions& g, const std::vector<std::string>& files, const std::vector<double>& weights,
                    const std::string& labels_out, const std::string& probs_out, std::ostream& out) {
  if (labels_out.empty() && probs_out.empty()) throw ValidationError("fuse needs --labels-out and/or --probs-out");
  const Config cfg = load_run_config(g);
  EnsembleInput input;
  input.weights = weights;
  for (const auto& f : files) {
    ProbabilityVolume pv;
    pv.channels = nifti::read_channels(f);
    with_context(f, [&] { validate_probabilities(pv); });
    input.members.push_back({f, std::move(pv)});
  }
  const auto fused = soft_vote(input, g.threads);
  const auto labels = argmax_labels(fused, cfg.classes);
  if (!probs_out.empty()) nifti::write_channels(fused.channels, probs_out);
  if (!labels_out.empty()) nifti::write_labels(labels, labels_out);
  out << "fused " << files.size() << " member(s)\n";
  return kExitOk;
}

/// Case id of a clean label file: the pairing-regex match, else the file name
/// without its NIfTI extension.
inline std::string case_id_for(const fs::path& p, const std::regex& re) {
  const auto name = p.filename().string();
  std::smatch m;
  if (std::regex_search(name, m, re)) return m.str(0);
  for (const char* ext : {".nii.gz", ".nii"}) {
    if (nifti::detail::has_suffix(name, ext)) return name.substr(0, name.size() - std::string(ext).size());
  }
  return name;
}

inline int run_perturb(const GlobalOptions& g, const std::string& clean_dir, std::size_t pairs, std::ostream& out,
                       std::ostream& err) {
  const Config cfg = load_run_config(g);
  std::error_code ec;
  if (!fs::is_directory(clean_dir, ec)) throw IoError("not a directory: '" + clean_dir + "'");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(clean_dir, ec)) {
    if (e.is_regular_file() && is_nifti_path(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no NIfTI files in '" + clean_dir + "'");
  const std::regex re(cfg.pairing_regex);
  std::vector<CleanCase> cases;
  std::map<std::string, std::string> seen;
  for (const auto& f : files) {
    CleanCase c;
    c.case_id = case_id_for(f, re);
    if (const auto [it, inserted] = seen.emplace(c.case_id, f.string()); !inserted) {
      throw ValidationError("case id " + c.case_id + " matches both '" + it->second + "' and '" + f.string() + "'");
    }
    c.path = f.string();
    c.labels = with_context(f.string(), [&] {
      auto labels = load_case_labels(f, cfg);
      validate_labels(labels, cfg.regions);
      return labels;
    });
    cases.push_back(std::move(c));
  }
  const auto result = generate_dataset(cases, cfg.perturb, pairs, g.output_dir, g.threads);
  std::string manifest;
  for (const auto& r : result.records) manifest += to_json(r).dump() + "\n";
  write_text_atomic(fs::path(g.output_dir) / "manifest.jsonl", manifest);
  for (const auto& s : result.skipped) {
    err << "skipped " << s.case_id << " pair " << s.pair_index << ": " << s.reason << "\n";
  }
  out << "wrote " << result.records.size() << " pair(s) to " << g.output_dir << "\n";
  return result.skipped.empty() ? kExitOk : kExitIo;
}

inline int run_refine(const GlobalOptions& g, const std::string& in, const std::string& out_path, std::ostream& out) {
  const Config cfg = load_run_config(g);
  const auto labels = with_context(in, [&] { return load_case_labels(in, cfg); });
  const auto refined = with_context(in, [&] { return refine(labels, cfg.refine, cfg.regions); });
  nifti::write_labels(refined, out_path);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) changed += labels[i] != refined[i];
  out << "refined " << in << ": " << changed << " voxel(s) changed\n";
  return kExitOk;
}

inline int run_overlay(const GlobalOptions& g, const std::string& pred, const std::string& ref,
                       const std::string& out_path, std::ostream& out) {
  const Config cfg = load_run_config(g);
  const auto p = load_case_labels(pred, cfg);
  const auto r = load_case_labels(ref, cfg);
  const auto overlay = with_context("'" + pred + "' vs '" + ref + "'", [&] { return error_overlay(p, r); });
  nifti::write_labels(overlay, out_path);
  out << count_nonzero(overlay) << " disagreeing voxel(s)\n";
  return kExitOk;
}

inline int run_report(const GlobalOptions& g, const std::string& reports_dir, std::ostream& out, std::ostream& err) {
  const Config cfg = load_run_config(g);
  std::error_code ec;
  if (!fs::is_directory(reports_dir, ec)) throw IoError("not a directory: '" + reports_dir + "'");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(reports_dir, ec)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, std::vector<CaseReport>> by_model;
  std::vector<std::string> order;
  for (const auto& f : files) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text(f));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(f.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("case_id")) {
      err << "not a case report, ignored: " << f.string() << "\n";
      continue;
    }
    auto r = with_context(f.string(), [&] { return case_report_from_json(j); });
    if (!by_model.count(r.model)) order.push_back(r.model);
    by_model[r.model].push_back(std::move(r));
  }
  std::sort(order.begin(), order.end());
  std::vector<SummaryTable> tables;
  if (order.empty()) {
    tables.push_back(aggregate({}, "none", cfg));
  } else {
    for (const auto& model : order) {
      const auto& reps = by_model[model];
      tables.push_back(with_context("model " + model, [&] { return aggregate(reps, model, reps.front().columns); }));
    }
  }
  write_summaries(g.output_dir, tables, {});
  out << "merged " << files.size() << " file(s) into " << tables.size() << " table(s)\n";
  return kExitOk;
}

/// Entry point shared by the executable and the tests.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Brain tumor segmentation evaluation, fusion, perturbation and refinement", "toposeg"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_path, "JSON configuration file");
  app.add_option("--seed", g.seed, "Master seed for perturbation");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1U, 1024U));
  app.add_option("--output-dir", g.output_dir, "Directory for outputs");

  std::string pred_dir, ref_dir, model = "model";
  auto* eval = app.add_subcommand("eval", "Evaluate predictions against references");
  eval->add_option("--pred-dir", pred_dir, "Prediction label files")->required();
  eval->add_option("--ref-dir", ref_dir, "Reference label files")->required();
  eval->add_option("--model", model, "Model name for the summary rows");

  std::vector<std::string> fuse_files;
  std::vector<double> weights;
  std::string labels_out, probs_out;
  auto* fuse = app.add_subcommand("fuse", "Soft-vote probability maps");
  fuse->add_option("files", fuse_files, "Probability NIfTI files (4th axis = class)")->required();
  fuse->add_option("--weights", weights, "One weight per file");
  fuse->add_option("--labels-out", labels_out, "Fused label map");
  fuse->add_option("--probs-out", probs_out, "Fused probability map");

  std::string clean_dir;
  std::size_t pairs = 1;
  auto* perturb = app.add_subcommand("perturb", "Generate corrupted/clean training pairs");
  perturb->add_option("--clean-dir", clean_dir, "Clean label files")->required();
  perturb->add_option("--pairs", pairs, "Pairs per case")->check(CLI::PositiveNumber);

  std::string refine_in, refine_out;
  auto* refine_cmd = app.add_subcommand("refine", "Rule-based topology refinement");
  refine_cmd->add_option("--in", refine_in, "Input labels")->required();
  refine_cmd->add_option("--out", refine_out, "Output labels")->required();

  std::string ov_pred, ov_ref, ov_out;
  auto* overlay = app.add_subcommand("overlay", "Voxelwise disagreement map");
  overlay->add_option("--pred", ov_pred, "Prediction labels")->required();
  overlay->add_option("--ref", ov_ref, "Reference labels")->required();
  overlay->add_option("--out", ov_out, "Output mask")->required();

  std::string reports_dir;
  auto* report = app.add_subcommand("report", "Merge per-case reports into a summary");
  report->add_option("--reports-dir", reports_dir, "Directory of case report JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    if (eval->parsed()) return run_eval(g, pred_dir, ref_dir, model, out, err);
    if (fuse->parsed()) return run_fuse(g, fuse_files, weights, labels_out, probs_out, out);
    if (perturb->parsed()) return run_perturb(g, clean_dir, pairs, out, err);
    if (refine_cmd->parsed()) return run_refine(g, refine_in, refine_out, out);
    if (overlay->parsed()) return run_overlay(g, ov_pred, ov_ref, ov_out, out);
    if (report->parsed()) return run_report(g, reports_dir, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::regex_error& e) {
    err << "error: bad pairing regex: " << e.what() << "\n";
    return kExitValidation;
  }
  err << app.help();
  return kExitValidation;
}

}  // namespace toposeg::cli
