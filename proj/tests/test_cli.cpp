#include "masstest/cli.hpp"

#include "helpers.hpp"
#include "masstest/core_data.hpp"
#include "masstest/report.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace masstest;
using testutil::TempDir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Small simulated dataset with an effect on channels 1 and 2.
std::filesystem::path simulate(const std::filesystem::path& dir) {
  const auto r = cli({"--seed", "3", "--threads", "1", "--out-dir", dir.string(), "simulate", "--channels", "6",
                      "--freqs", "6", "--times", "8", "--trials-per-condition", "40", "--columns", "3",
                      "--effect-channels", "1,2", "--effect-freqs", "1:4", "--effect-times", "2:6",
                      "--target-accuracy", "0.9"});
  EXPECT_EQ(r.code, 0) << r.err;
  return dir / "dataset";
}

const std::vector<std::string> kRunFlags{"--k", "8", "--u", "3", "--v", "3"};

}  // namespace

TEST(Cli, VersionAndUsageErrors) {
  const auto v = cli({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find(kVersion), std::string::npos);
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"run"}).code, 1);
  EXPECT_EQ(cli({"bogus"}).code, 1);
  TempDir dir("cli_err");
  const auto missing = cli({"--out-dir", dir.path().string(), "run", (dir.path() / "nope").string()});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("error:"), std::string::npos);
}

TEST(Cli, CorrectPrintsMask) {
  TempDir dir("cli_correct");
  const auto pfile = dir.path() / "p.csv";
  {
    std::ofstream out(pfile);
    out << "0.001,0.01,0.02,0.9\n";
  }
  const auto r = cli({"--out-dir", dir.path().string(), "correct", pfile.string(), "--method", "bh"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mask: 1,1,1,0"), std::string::npos);
  const auto b = cli({"--out-dir", dir.path().string(), "correct", pfile.string(), "--method", "bonferroni"});
  EXPECT_NE(b.out.find("mask: 1,1,0,0"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "correction.json"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "mask.csv"));
}

TEST(Cli, RunWritesOutputsAndReplayIsIdentical) {
  TempDir dir("cli_run");
  const auto ds = simulate(dir.path());
  const auto out1 = dir.path() / "run1";
  std::vector<std::string> args{"--seed", "5", "--threads", "2", "--out-dir", out1.string(), "run", ds.string(),
                                "--csv", "--topomap"};
  args.insert(args.end(), kRunFlags.begin(), kRunFlags.end());
  const auto r = cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("SC="), std::string::npos);
  for (const char* f : {"result.json", "tests.csv", "topomap.svg", "topomap.csv", "manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(out1 / f)) << f;
  }
  const auto result = nlohmann::json::parse(read_text(out1 / "result.json"));
  const auto manifest = nlohmann::json::parse(read_text(out1 / "manifest.json"));
  EXPECT_EQ(manifest["command"], "run");
  EXPECT_EQ(manifest["seed"], 5);

  // Topomap rows are the significant triples.
  const auto topo = read_text(out1 / "topomap.csv");
  const std::size_t rows = std::count(topo.begin(), topo.end(), '\n') - 1;
  EXPECT_EQ(rows, result["sets"]["SCFT"].size());
  const auto svg = read_text(out1 / "topomap.svg");
  EXPECT_NE(svg.find("<svg"), std::string::npos);

  const auto out2 = dir.path() / "run2";
  const auto rep = cli({"--threads", "1", "--out-dir", out2.string(), "replay", (out1 / "manifest.json").string()});
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_EQ(read_text(out1 / "result.json"), read_text(out2 / "result.json"));
  EXPECT_EQ(read_text(out1 / "tests.csv"), read_text(out2 / "tests.csv"));
}

TEST(Cli, ClusterAndImport) {
  TempDir dir("cli_cluster");
  const auto ds = simulate(dir.path());
  const auto r = cli({"--out-dir", (dir.path() / "cl").string(), "cluster", ds.string(), "--n-perm", "50"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(read_text(dir.path() / "cl" / "clusters.json"));
  EXPECT_TRUE(j.contains("clusters"));

  const auto csv = dir.path() / "toy.csv";
  {
    std::ofstream out(csv);
    out << "a,1,2,3\nb,2,3,4\na,1,1,1\nb,5,5,5\n";
  }
  const auto imp = cli({"--out-dir", dir.path().string(), "import", csv.string(), "--kind", "tfr"});
  ASSERT_EQ(imp.code, 0) << imp.err;
  const auto t = load_tfr(dir.path() / "imported");
  EXPECT_EQ(t.shape(), (TfrShape{4, 1, 1, 3}));
}
