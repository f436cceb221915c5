#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "toposeg/cli.hpp"

using namespace toposeg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("toposeg_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "toposeg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::cli_main(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_probs(const fs::path& p, Extent e, std::vector<float> per_class) {
  std::vector<Volume<float>> ch;
  for (float v : per_class) ch.emplace_back(e, Spacing{1, 1, 1}, v);
  nifti::write_channels(ch, p);
}

void make_case_dirs(const fs::path& dir) {
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "ref");
  const auto ref = fixture::nested_tumor(12, 4);
  auto pred = ref;
  pred(0, 0, 0) = 2;
  nifti::write_labels(ref, dir / "ref" / "BraTS-GLI-00001-000-seg.nii.gz");
  nifti::write_labels(pred, dir / "pred" / "BraTS-GLI-00001-000.nii.gz");
  nifti::write_labels(ref, dir / "ref" / "BraTS-GLI-00002-000-seg.nii.gz");
  nifti::write_labels(ref, dir / "pred" / "BraTS-GLI-00002-000.nii.gz");
}

}  // namespace

TEST(Cli, EvalWritesSummariesAndReports) {
  const auto dir = temp_dir("eval");
  make_case_dirs(dir);
  const auto r = run({"--output-dir", (dir / "out").string(), "eval", "--pred-dir", (dir / "pred").string(),
                      "--ref-dir", (dir / "ref").string(), "--model", "baseline"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"summary.csv", "summary.json", "summary.md", "reports/baseline__BraTS-GLI-00001-000.json"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }
  const auto tables = parse_summary_csv(slurp(dir / "out" / "summary.csv"));
  ASSERT_EQ(tables.size(), 1U);
  EXPECT_EQ(tables[0].model, "baseline");
  EXPECT_EQ(parse_summary_json(slurp(dir / "out" / "summary.json"))[0].case_count, 2U);

  const auto again = run({"--threads", "3", "--output-dir", (dir / "out2").string(), "eval", "--pred-dir",
                          (dir / "pred").string(), "--ref-dir", (dir / "ref").string(), "--model", "baseline"});
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(slurp(dir / "out" / "summary.csv"), slurp(dir / "out2" / "summary.csv"));

  const auto merged = run({"--output-dir", (dir / "merged").string(), "report", "--reports-dir",
                           (dir / "out" / "reports").string()});
  ASSERT_EQ(merged.code, 0) << merged.err;
  EXPECT_EQ(slurp(dir / "merged" / "summary.csv"), slurp(dir / "out" / "summary.csv"));
}

TEST(Cli, EvalReportsUnpairedFiles) {
  const auto dir = temp_dir("unpaired");
  make_case_dirs(dir);
  nifti::write_labels(LabelMap(Extent{12, 12, 12}), dir / "pred" / "BraTS-GLI-00003-000.nii.gz");
  const auto r = run({"--output-dir", (dir / "out").string(), "eval", "--pred-dir", (dir / "pred").string(),
                      "--ref-dir", (dir / "ref").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("BraTS-GLI-00003-000"), std::string::npos);
  EXPECT_NE(slurp(dir / "out" / "summary.json").find("BraTS-GLI-00003-000"), std::string::npos);
}

TEST(Cli, FailuresMapToExitCodes) {
  const auto dir = temp_dir("codes");
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"eval", "--bogus"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
  const auto missing = run({"--output-dir", dir.string(), "eval", "--pred-dir", (dir / "nope").string(), "--ref-dir",
                            (dir / "nope2").string()});
  EXPECT_EQ(missing.code, 2);
  EXPECT_FALSE(fs::exists(dir / "summary.csv"));
  EXPECT_EQ(run({"--config", (dir / "absent.json").string(), "refine", "--in", "a", "--out", "b"}).code, 2);
  std::ofstream(dir / "bad.json") << R"({"metrics": {"unit": "furlong"}})";
  EXPECT_EQ(run({"--config", (dir / "bad.json").string(), "refine", "--in", "a", "--out", "b"}).code, 1);
}

TEST(Cli, FuseWritesOutputsAndNamesMismatchedFiles) {
  const auto dir = temp_dir("fuse");
  write_probs(dir / "a.nii.gz", {3, 3, 3}, {0.1F, 0.2F, 0.3F, 0.4F});
  write_probs(dir / "b.nii.gz", {3, 3, 3}, {0.7F, 0.1F, 0.1F, 0.1F});
  write_probs(dir / "c.nii.gz", {3, 3, 4}, {0.25F, 0.25F, 0.25F, 0.25F});
  const auto ok = run({"fuse", (dir / "a.nii.gz").string(), (dir / "b.nii.gz").string(), "--labels-out",
                       (dir / "l.nii.gz").string(), "--probs-out", (dir / "p.nii.gz").string()});
  ASSERT_EQ(ok.code, 0) << ok.err;
  const auto labels = nifti::read_labels(dir / "l.nii.gz");
  EXPECT_EQ(labels[0], 0);  // (0.4, 0.15, 0.2, 0.25)
  EXPECT_EQ(nifti::read_channels(dir / "p.nii.gz").size(), 4U);

  const auto weighted = run({"fuse", (dir / "a.nii.gz").string(), (dir / "b.nii.gz").string(), "--weights", "9", "1",
                             "--labels-out", (dir / "w.nii.gz").string()});
  ASSERT_EQ(weighted.code, 0);
  EXPECT_EQ(nifti::read_labels(dir / "w.nii.gz")[0], 3);

  const auto bad = run({"fuse", (dir / "a.nii.gz").string(), (dir / "c.nii.gz").string(), "--labels-out",
                        (dir / "x.nii.gz").string()});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("a.nii.gz"), std::string::npos) << bad.err;
  EXPECT_NE(bad.err.find("c.nii.gz"), std::string::npos) << bad.err;
  EXPECT_EQ(run({"fuse", (dir / "a.nii.gz").string()}).code, 1);
}

TEST(Cli, PerturbIsDeterministic) {
  const auto dir = temp_dir("perturb");
  fs::create_directories(dir / "clean");
  nifti::write_labels(fixture::nested_tumor(14, 5), dir / "clean" / "BraTS-GLI-00001-000-seg.nii.gz");
  nifti::write_labels(fixture::sphere(14, 5), dir / "clean" / "extra.nii.gz");
  const std::vector<std::string> args{"--seed", "42", "--output-dir", (dir / "out").string(), "perturb",
                                      "--clean-dir", (dir / "clean").string(), "--pairs", "2"};
  ASSERT_EQ(run(args).code, 0);
  const auto first = slurp(dir / "out" / "manifest.jsonl");
  const auto mask = slurp(dir / "out" / "masks" / "extra_p1_mask.nii.gz");
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(slurp(dir / "out" / "manifest.jsonl"), first);
  EXPECT_EQ(slurp(dir / "out" / "masks" / "extra_p1_mask.nii.gz"), mask);
  const auto rows = read_manifest(dir / "out" / "manifest.jsonl");
  ASSERT_EQ(rows.size(), 4U);
  EXPECT_EQ(rows[0].case_id, "BraTS-GLI-00001-000");

  auto other = args;
  other[1] = "43";
  other[3] = (dir / "out43").string();
  ASSERT_EQ(run(other).code, 0);
  EXPECT_NE(read_manifest(dir / "out43" / "manifest.jsonl")[0].seed, rows[0].seed);
}

TEST(Cli, RefineAndOverlay) {
  const auto dir = temp_dir("refine");
  auto l = fixture::nested_tumor(14, 5);
  l(0, 0, 0) = 3;  // isolated speck
  nifti::write_labels(l, dir / "in.nii.gz");
  const auto r = run({"refine", "--in", (dir / "in.nii.gz").string(), "--out", (dir / "out.nii.gz").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto refined = nifti::read_labels(dir / "out.nii.gz");
  EXPECT_EQ(refined(0, 0, 0), 0);
  EXPECT_EQ(refined, refine(l));

  const auto o = run({"overlay", "--pred", (dir / "in.nii.gz").string(), "--ref", (dir / "out.nii.gz").string(),
                      "--out", (dir / "ov.nii.gz").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < l.size(); ++i) changed += l[i] != refined[i];
  EXPECT_GE(changed, 1U);
  EXPECT_EQ(count_nonzero(nifti::read_labels(dir / "ov.nii.gz")), changed);

  LabelMap bad(Extent{3, 3, 3});
  bad[4] = 6;
  nifti::write_labels(bad, dir / "bad.nii.gz");
  const auto b = run({"refine", "--in", (dir / "bad.nii.gz").string(), "--out", (dir / "o.nii.gz").string()});
  EXPECT_EQ(b.code, 1);
  EXPECT_NE(b.err.find("bad.nii.gz"), std::string::npos);
}
