#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "eetg/cli.hpp"
#include "support.hpp"

using namespace eetg;

namespace {

std::string slurp(const fs::path& p) { return read_file(p); }

void spit(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << s;
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

int count_of(const std::string& s, const std::string& needle) {
  int n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

// Short episodes and a tiny budget keep a full run well under a second.
std::string tiny_yaml(const std::string& variant, const fs::path& out, int workers = 1) {
  std::ostringstream y;
  y << "variant: " << variant << "\nmaster_seed: 11\nscale_factor: 0.0005\noutput_dir: " << out.string()
    << "\nworkers: " << workers << "\nsim:\n  max_episode_s: 2\nars:\n  directions: 8\n  top: 4\n"
    << "eval:\n  reps: 2\n";
  return y.str();
}

int cli(std::vector<std::string> args, std::string* out = nullptr, std::string* err = nullptr) {
  args.insert(args.begin(), "eetg");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream o, e;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out != nullptr) *out = o.str();
  if (err != nullptr) *err = e.str();
  return code;
}

std::vector<std::string> result_files(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json" && e.path().filename() != "config.json")
      out.push_back(fs::relative(e.path(), dir).string());
  std::sort(out.begin(), out.end());
  return out;
}

// A finished EETG run shared by the read-only tests below.
class FinishedRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    scratch_ = new fixtures::ScratchDir("cli_run");
    dir_ = scratch_->path() / "run";
    spit(scratch_->path() / "run.yaml", tiny_yaml("eetg", dir_));
    std::string out, err;
    ASSERT_EQ(cli({"run", (scratch_->path() / "run.yaml").string()}, &out, &err), 0) << err;
  }
  static void TearDownTestSuite() {
    delete scratch_;
    scratch_ = nullptr;
  }
  static fixtures::ScratchDir* scratch_;
  static fs::path dir_;
};
fixtures::ScratchDir* FinishedRun::scratch_ = nullptr;
fs::path FinishedRun::dir_;

}  // namespace

TEST(Run, ByteIdenticalAcrossRepeatsAndWorkerCounts) {
  fixtures::ScratchDir s("cli_det");
  const std::vector<std::pair<std::string, int>> runs{{"a", 1}, {"b", 1}, {"c", 3}};
  for (const auto& [name, workers] : runs) {
    spit(s.path() / (name + ".yaml"), tiny_yaml("eetg", s.path() / name, workers));
    ASSERT_EQ(cli({"run", (s.path() / (name + ".yaml")).string()}), 0);
  }
  // the command-line override reaches the run too
  spit(s.path() / "d.yaml", tiny_yaml("eetg", s.path() / "d", 1));
  ASSERT_EQ(cli({"run", (s.path() / "d.yaml").string(), "--workers", "2"}), 0);

  const auto files = result_files(s.path() / "a");
  EXPECT_NE(std::find(files.begin(), files.end(), "archive.json"), files.end());
  EXPECT_NE(std::find(files.begin(), files.end(), "policies/policy.json"), files.end());
  EXPECT_NE(std::find(files.begin(), files.end(), "results.csv"), files.end());
  EXPECT_EQ(count_of(std::accumulate(files.begin(), files.end(), std::string()), "snapshots/"), 10);
  for (const char* other : {"b", "c", "d"}) {
    ASSERT_EQ(result_files(s.path() / other), files) << other;
    for (const auto& f : files) EXPECT_EQ(slurp(s.path() / other / f), slurp(s.path() / "a" / f)) << other << "/" << f;
  }
  const Manifest ma = read_manifest(s.path() / "a"), mc = read_manifest(s.path() / "c");
  EXPECT_TRUE(ma.complete);
  EXPECT_EQ(ma.config_hash, mc.config_hash);
  EXPECT_EQ(ma.used.tg_evals, ma.plan.tg_opt_evals);
  EXPECT_EQ(ma.used.policy_evals, ma.plan.policy_opt_evals);
  for (const auto& f : ma.files) EXPECT_TRUE(fs::exists(s.path() / "a" / f)) << f;
}

TEST(Run, EveryBaselineCompletes) {
  fixtures::ScratchDir s("cli_variants");
  for (const char* v : {"pmtg_enc", "pmtg_ind", "cmaes_enc", "cmaes_ind", "eetg_itr", "eetg_itr_policy"}) {
    spit(s.path() / "c.yaml", tiny_yaml(v, s.path() / v));
    std::string err;
    ASSERT_EQ(cli({"run", (s.path() / "c.yaml").string()}, nullptr, &err), 0) << v << ": " << err;
    EXPECT_EQ(count_lines(slurp(s.path() / v / "results.csv")), 1 + kNumCells * 2) << v;
    EXPECT_TRUE(read_manifest(s.path() / v).complete) << v;
  }
}

TEST(Run, ConfigErrorsExitTwo) {
  fixtures::ScratchDir s("cli_cfg");
  spit(s.path() / "missing.yaml", "variant: eetg\nmaster_seed: 1\noutput_dir: x\n");
  std::string err;
  EXPECT_EQ(cli({"run", (s.path() / "missing.yaml").string()}, nullptr, &err), 2);
  EXPECT_NE(err.find("scale_factor"), std::string::npos) << err;

  spit(s.path() / "unknown.yaml", "variant: eetg\nmaster_seed: 1\nscale_factor: 0.001\noutput_dir: x\nbogus: 1\n");
  EXPECT_EQ(cli({"run", (s.path() / "unknown.yaml").string()}, nullptr, &err), 2);
  EXPECT_NE(err.find("line 5"), std::string::npos) << err;

  EXPECT_EQ(cli({"run", (s.path() / "absent.yaml").string()}, nullptr, &err), 2);
  EXPECT_EQ(cli({"frobnicate"}, nullptr, &err), 2);
  EXPECT_FALSE(fs::exists(s.path() / "x"));
}

TEST(Run, OutputDirCannotEscapeTheRoot) {
  fixtures::ScratchDir s("cli_escape");
  fs::create_directories(s.path() / "root");
  ::setenv(kOutputRootEnv, (s.path() / "root").c_str(), 1);
  spit(s.path() / "esc.yaml", tiny_yaml("eetg", "../escaped"));
  std::string err;
  const int code = cli({"run", (s.path() / "esc.yaml").string()}, nullptr, &err);
  spit(s.path() / "abs.yaml", tiny_yaml("eetg", s.path() / "elsewhere"));
  const int code_abs = cli({"run", (s.path() / "abs.yaml").string()}, nullptr, &err);
  spit(s.path() / "ok.yaml", tiny_yaml("pmtg_enc", "runs/ok"));
  const int code_ok = cli({"run", (s.path() / "ok.yaml").string()});
  ::unsetenv(kOutputRootEnv);

  EXPECT_EQ(code, 2);
  EXPECT_EQ(code_abs, 2);
  EXPECT_FALSE(fs::exists(s.path() / "escaped"));
  EXPECT_FALSE(fs::exists(s.path() / "elsewhere"));
  EXPECT_EQ(code_ok, 0);
  EXPECT_TRUE(fs::exists(s.path() / "root" / "runs" / "ok" / "results.csv"));

  const fs::path d = s.path();
  EXPECT_THROW(inside(d, "../x"), std::runtime_error);
  EXPECT_THROW(inside(d, "a/../../x"), std::runtime_error);
  EXPECT_THROW(inside(d, "/etc/x"), std::runtime_error);
  EXPECT_EQ(inside(d, "a/b.json"), (d / "a/b.json").lexically_normal());
}

TEST_F(FinishedRun, EvalShapeAndReproducibility) {
  std::string out, err;
  ASSERT_EQ(cli({"eval", dir_.string(), "--reps", "3", "--seed", "5"}, &out, &err), 0) << err;
  const std::string results = slurp(dir_ / "eval/results.csv");
  const std::string summary = slurp(dir_ / "eval/summary.csv");
  EXPECT_EQ(count_lines(results), 1 + kNumCells * 3);
  EXPECT_EQ(count_lines(summary), 1 + kNumEnvTypes);
  EXPECT_NE(out.find("aggregate median"), std::string::npos);

  ASSERT_EQ(cli({"eval", dir_.string(), "--reps", "3", "--seed", "5", "--workers", "2"}), 0);
  EXPECT_EQ(slurp(dir_ / "eval/results.csv"), results);
  EXPECT_EQ(slurp(dir_ / "eval/summary.csv"), summary);

  // the stored protocol reproduces the run's own results
  ASSERT_EQ(cli({"eval", dir_.string()}), 0);
  EXPECT_EQ(slurp(dir_ / "eval/results.csv"), slurp(dir_ / "results.csv"));
}

TEST_F(FinishedRun, EvalRefusesIncompleteRuns) {
  const fs::path copy = scratch_->path() / "partial";
  fs::copy(dir_, copy, fs::copy_options::recursive);
  fs::remove_all(copy / "eval");
  Manifest m = read_manifest(copy);
  m.complete = false;
  m.error = "killed";
  write_json(copy / "manifest.json", manifest_to_json(m));
  std::string err;
  EXPECT_EQ(cli({"eval", copy.string()}, nullptr, &err), 1);
  EXPECT_NE(err.find("incomplete"), std::string::npos) << err;
  EXPECT_NE(err.find("killed"), std::string::npos) << err;
  EXPECT_FALSE(fs::exists(copy / "eval"));
  EXPECT_EQ(cli({"eval", (scratch_->path() / "nowhere").string()}, nullptr, &err), 1);
}

TEST_F(FinishedRun, PlotIsDeterministicAndDrawsEightyCells) {
  const fs::path a = scratch_->path() / "a.svg", b = scratch_->path() / "b.svg";
  const fs::path ha = scratch_->path() / "ha.svg", hb = scratch_->path() / "hb.svg";
  const std::string results = (dir_ / "results.csv").string();
  const std::string archive = (dir_ / "archive.json").string();
  ASSERT_EQ(cli({"plot", results, "-o", a.string(), "--archive", archive, "--heatmap", ha.string()}), 0);
  ASSERT_EQ(cli({"plot", results, "-o", b.string(), "--archive", archive, "--heatmap", hb.string()}), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(slurp(ha), slurp(hb));
  EXPECT_EQ(count_of(slurp(ha), "class=\"cell\""), kNumCells);
  EXPECT_EQ(slurp(a).rfind("<svg", 0), 0u);
}

TEST_F(FinishedRun, PlotWarnsAboutEmptyGroupsAndRejectsBadSchema) {
  // keep only the Slope rows: three of four groups are empty for this variant
  std::istringstream in(slurp(dir_ / "results.csv"));
  std::string csv, line;
  std::getline(in, line);
  csv = line + "\n";
  while (std::getline(in, line))
    if (line.find(",Slope,") != std::string::npos) csv += line + "\n";
  const fs::path part = scratch_->path() / "slope_only.csv";
  spit(part, csv);
  std::string out, err;
  ASSERT_EQ(cli({"plot", part.string(), "-o", (scratch_->path() / "p.svg").string()}, &out, &err), 0);
  EXPECT_EQ(count_of(err, "warning:"), 3) << err;
  EXPECT_NE(err.find("eetg has no results for Beam"), std::string::npos) << err;

  spit(scratch_->path() / "bad.csv", "variant,type\neetg,Slope\n");
  EXPECT_EQ(cli({"plot", (scratch_->path() / "bad.csv").string(), "-o", (scratch_->path() / "q.svg").string()}, &out,
                &err),
            1);
  EXPECT_NE(err.find("schema"), std::string::npos) << err;
  EXPECT_EQ(cli({"plot"}, &out, &err), 2);
}

TEST_F(FinishedRun, InspectCoverageAndGaits) {
  auto gait_total = [](const std::string& text) {
    std::smatch m;
    int sum = 0;
    std::string rest = text.substr(text.find("gaits:"));
    const std::regex re("=(\\d+)");
    for (std::sregex_iterator it(rest.begin(), rest.end(), re), end; it != end; ++it) sum += std::stoi((*it)[1]);
    return sum;
  };

  const fs::path empty = scratch_->path() / "empty.json";
  write_json(empty, archive_to_json(Archive{}, 1, "h"));
  std::string out, err;
  ASSERT_EQ(cli({"inspect", empty.string()}, &out), 0);
  EXPECT_NE(out.find("coverage 0/80"), std::string::npos) << out;
  EXPECT_EQ(gait_total(out), 0);

  Archive init;
  QDConfig qd;
  qd.master_seed = 5;
  initialize(init, qd, [](const TGParams& tg, const EnvCell&, std::uint64_t) { return tg.swing; });
  const fs::path post_init = scratch_->path() / "init.json";
  write_json(post_init, archive_to_json(init, 5, "h"));
  ASSERT_EQ(cli({"inspect", post_init.string()}, &out), 0);
  EXPECT_NE(out.find("coverage 8/80"), std::string::npos) << out;
  EXPECT_EQ(gait_total(out), 8);

  ASSERT_EQ(cli({"inspect", (dir_ / "archive.json").string()}, &out), 0);
  const int coverage = archive_from_json(read_json(dir_ / "archive.json")).archive.coverage();
  EXPECT_NE(out.find("coverage " + std::to_string(coverage) + "/80"), std::string::npos) << out;
  EXPECT_EQ(gait_total(out), coverage);

  json corrupt = read_json(dir_ / "archive.json");
  corrupt["cells"][4]["tg"] = "oops";
  const fs::path bad = scratch_->path() / "corrupt.json";
  write_json(bad, corrupt);
  EXPECT_EQ(cli({"inspect", bad.string()}, &out, &err), 1);
  EXPECT_NE(err.find("cell record 4"), std::string::npos) << err;
}

TEST_F(FinishedRun, SnapshotsAreMonotone) {
  const Manifest m = read_manifest(dir_);
  std::vector<Archive> snaps;
  for (const auto& f : m.files)
    if (f.rfind("snapshots/", 0) == 0) snaps.push_back(archive_from_json(read_json(dir_ / f)).archive);
  ASSERT_EQ(snaps.size(), 10u);
  for (std::size_t k = 1; k < snaps.size(); ++k) {
    EXPECT_GT(snaps[k].evaluations, snaps[k - 1].evaluations);
    for (int c = 0; c < kNumCells; ++c)
      if (snaps[k - 1].cells[c]) {
        ASSERT_TRUE(snaps[k].cells[c]);
        EXPECT_GE(snaps[k].cells[c]->fitness, snaps[k - 1].cells[c]->fitness);
      }
  }
}

TEST_F(FinishedRun, TraceWritesOneRowPerControlStep) {
  const fs::path csv = scratch_->path() / "trace.csv";
  std::string out, err;
  ASSERT_EQ(cli({"trace", "--run", dir_.string(), "--cell", "stairs/7", "-o", csv.string()}, &out, &err), 0) << err;
  const std::string text = slurp(csv);
  EXPECT_EQ(text.rfind("time,x,y,z", 0), 0u);
  const std::smatch m = [&] {
    std::smatch r;
    std::regex_search(out, r, std::regex("(\\d+) steps"));
    return r;
  }();
  ASSERT_FALSE(m.empty()) << out;
  EXPECT_EQ(count_lines(text), 1 + std::stoi(m[1]));

  EXPECT_EQ(cli({"trace", "--tg", "0.06,0,0.08,0,1", "--cell", "beam/2", "-o", csv.string()}, &out, &err), 0) << err;
  EXPECT_EQ(cli({"trace", "--cell", "lava/2", "-o", csv.string()}, &out, &err), 1);
}
