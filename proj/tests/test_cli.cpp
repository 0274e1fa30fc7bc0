#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numbers>

#include "sensrank/dataset.hpp"
#include "sensrank/report.hpp"
#include "sensrank/subprocess.hpp"
#include "test_support.hpp"

#include <nlohmann/json.hpp>

using namespace sensrank;
using sensrank::testing::TempDir;

namespace {

struct Run {
  int code;
  std::string out;  // stdout and stderr
};

Run cli(const std::string& args) {
  const auto r = run_shell(std::string(SENSRANK_CLI) + " " + args + " 2>&1", "");
  return {r.exit_code, r.out};
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

std::filesystem::path script(const TempDir& dir, const std::string& name, const std::string& body) {
  const auto p = dir.write(name, "#!/bin/sh\n" + body);
  std::filesystem::permissions(p, std::filesystem::perms::owner_all);
  return p;
}

}  // namespace

TEST(Cli, RankWithForest) {
  TempDir dir;
  ASSERT_EQ(cli("generate friedman1 --n 500 --noise 1 --seed 3 --out " + q(dir / "f.csv")).code, 0);
  const auto r = cli("rank --input " + q(dir / "f.csv") + " --target y --model rf --seed 1 --out " + q(dir / "r.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rep = read_report(dir / "r.json");
  EXPECT_EQ(rep.features.size(), 20u);
  EXPECT_EQ(rep.seed, 1u);
  EXPECT_EQ(rep.n_half, 250u);
  EXPECT_TRUE(rep.holdout_mae);
  EXPECT_EQ(rep.model.at("kind"), "random_forest");
}

TEST(Cli, RankCsvAndMarkdownOutputs) {
  TempDir dir;
  ASSERT_EQ(cli("generate friedman1 --n 300 --seed 3 --k 6 --out " + q(dir / "f.csv")).code, 0);
  const auto base = "rank --input " + q(dir / "f.csv") + " --target y --model linear --scale ";
  ASSERT_EQ(cli(base + "--out " + q(dir / "r.csv")).code, 0);
  EXPECT_EQ(read_file(dir / "r.csv").substr(0, 37), "name,S_i,S_Ti,rank_first,rank_total\nx");
  ASSERT_EQ(cli(base + "--indices total --out " + q(dir / "r.md")).code, 0);
  EXPECT_EQ(read_file(dir / "r.md").substr(0, 32), "| Rank | Feature | S_Ti | S_Ti (");
}

TEST(Cli, MissingTargetIsUsageError) {
  TempDir dir;
  ASSERT_EQ(cli("generate friedman1 --n 100 --out " + q(dir / "f.csv")).code, 0);
  const auto r = cli("rank --input " + q(dir / "f.csv") + " --out " + q(dir / "r.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("--target"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(dir / "r.json"));
}

TEST(Cli, ParseErrorNamesStage) {
  TempDir dir;
  dir.write("bad.csv", "a,y\n1,2\nx,3\n4,5\n");
  const auto r = cli("rank --input " + q(dir / "bad.csv") + " --target y --out " + q(dir / "r.json"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("error [parse]"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("row 2, column 1"), std::string::npos) << r.out;
}

TEST(Cli, BenchmarkRows) {
  TempDir dir;
  const auto r = cli("benchmark friedman2 --noise 0 --models true,rf --rfe linear,rf --n 2000 --seed 1 --out " +
                     q(dir / "t.json") + " --report-dir " + q(dir / "reports"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto t = comparison_from_json(read_file(dir / "t.json"));
  std::vector<std::string> labels;
  for (const auto& row : t.rows) labels.push_back(row.label);
  for (const char* want : {"S_Ti-true", "S_Ti-rf", "RFE-LR", "RFE-RF"})
    EXPECT_NE(std::find(labels.begin(), labels.end(), want), labels.end()) << want;
  EXPECT_EQ(labels.size(), 6u);  // plus S_i rows by default
  EXPECT_EQ(t.relevant, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(t.k_total, 20u);
  EXPECT_EQ(t.metadata.at("distribution"), "paper_ranges");
  EXPECT_EQ(t.metadata.at("seed"), "1");
  EXPECT_TRUE(std::filesystem::exists(dir / "reports" / "true.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "reports" / "rf.json"));
}

TEST(Cli, BenchmarkFirstOrderRows) {
  TempDir dir;
  const auto r = cli("benchmark friedman1 --models true --rfe '' --indices both --n 1000 --out " + q(dir / "t.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto t = comparison_from_json(read_file(dir / "t.json"));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1].label, "S_i-true");
}

TEST(Cli, BenchmarkNotesNormalDistribution) {
  TempDir dir;
  const auto r = cli("benchmark friedman1 --noise 2 --dist normal --models true --rfe '' --n 2000 --out " +
                     q(dir / "t.md"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(read_file(dir / "t.md").find("- distribution: normal(0.5,0.25)"), std::string::npos);
}

TEST(Cli, UnknownBenchmark) {
  TempDir dir;
  const auto r = cli("benchmark nosuch --out " + q(dir / "t.json"));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.out.find("nosuch"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(dir / "t.json"));
}

TEST(Cli, OracleCheckAdditivePasses) {
  TempDir dir;
  const auto r = cli("oracle-check additive --coef 2,1 --n-half 65536 --seed 1 --out " + q(dir / "c.json"));
  EXPECT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(read_file(dir / "c.json"));
  EXPECT_TRUE(j.at("pass").get<bool>());
  EXPECT_LE(j.at("max_deviation").get<double>(), 0.02);
  EXPECT_EQ(j.at("features").size(), 2u);
}

TEST(Cli, OracleCheckInteractionTotals) {
  TempDir dir;
  const auto r = cli("oracle-check interaction --n-half 65536 --seed 1 --out " + q(dir / "c.json"));
  const auto j = nlohmann::json::parse(read_file(dir / "c.json"));
  for (const auto& f : j.at("features")) EXPECT_LE(f.at("S_Ti_deviation").get<double>(), 0.02) << r.out;
}

TEST(Cli, OracleCheckImpossibleToleranceFails) {
  TempDir dir;
  const auto r = cli("oracle-check additive --coef 2,1 --n-half 4096 --outer 200 --inner 200 --tolerance 1e-9 --out " +
                     q(dir / "c.json"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
  EXPECT_NE(r.out.find("x0: S_i"), std::string::npos);
  EXPECT_NE(r.out.find("x1: S_i"), std::string::npos);
  EXPECT_FALSE(nlohmann::json::parse(read_file(dir / "c.json")).at("pass").get<bool>());
}

TEST(Cli, GenerateShapeAndDeterminism) {
  TempDir dir;
  ASSERT_EQ(cli("generate friedman1 --n 500 --noise 1 --seed 3 --out " + q(dir / "a.csv")).code, 0);
  ASSERT_EQ(cli("generate friedman1 --n 500 --noise 1 --seed 3 --out " + q(dir / "b.csv")).code, 0);
  const auto a = read_file(dir / "a.csv");
  EXPECT_EQ(a, read_file(dir / "b.csv"));
  const auto d = load_csv(dir / "a.csv", ColumnRef{std::string("y")});
  EXPECT_EQ(d.rows(), 500u);
  EXPECT_EQ(d.cols() + 1, 21u);
  ASSERT_EQ(cli("generate friedman1 --n 500 --noise 1 --seed 4 --out " + q(dir / "c.csv")).code, 0);
  EXPECT_NE(a, read_file(dir / "c.csv"));
}

TEST(Cli, GenerateFriedman2Ranges) {
  TempDir dir;
  ASSERT_EQ(cli("generate friedman2 --dist paper_ranges --n 400 --out " + q(dir / "f.csv")).code, 0);
  const auto d = load_csv(dir / "f.csv", ColumnRef{std::string("y")});
  for (double v : d.features().column(1)) {
    EXPECT_GE(v, 40 * std::numbers::pi);
    EXPECT_LE(v, 560 * std::numbers::pi);
  }
}

TEST(Cli, ExternalModel) {
  TempDir dir;
  ASSERT_EQ(cli("generate additive --coef 1,2,3,4 --n 400 --out " + q(dir / "f.csv")).code, 0);
  const auto first =
      script(dir, "first.sh", "read mode\nif [ \"$mode\" = \"#predict\" ]; then awk -F, '{print $1}'; else cat >/dev/null; fi\n");
  auto r = cli("rank --input " + q(dir / "f.csv") + " --target y --model external --extern-cmd " + q(first) +
               " --out " + q(dir / "r.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rep = read_report(dir / "r.json");
  EXPECT_EQ(rep.features[0].rank_total, 1u);
  EXPECT_EQ(rep.features[0].rank_first, 1u);
  for (std::size_t i = 1; i < 4; ++i) {
    // ignored columns: identical totals, zero first-order numerator
    EXPECT_EQ(rep.features[i].total_raw, rep.features[1].total_raw);
    EXPECT_EQ(rep.features[i].first_raw, 0.0);
  }
  EXPECT_GT(rep.features[0].total_raw, rep.features[1].total_raw + 0.5);
}

TEST(Cli, ConstantExternalModelHitsZeroVariance) {
  TempDir dir;
  ASSERT_EQ(cli("generate additive --coef 1,2,3,4 --n 400 --out " + q(dir / "f.csv")).code, 0);
  const auto mean = script(dir, "mean.sh",
                           "read mode\nif [ \"$mode\" = \"#predict\" ]; then awk '{print 14.5}'; else cat >/dev/null; fi\n");
  const auto r = cli("rank --input " + q(dir / "f.csv") + " --target y --model external --extern-cmd " + q(mean) +
                     " --out " + q(dir / "r.json"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("error [estimate]"), std::string::npos) << r.out;
  EXPECT_FALSE(std::filesystem::exists(dir / "r.json"));
  EXPECT_FALSE(std::filesystem::exists(dir / "r.json.tmp"));
}

TEST(Cli, FailingExternalModelLeavesNoOutput) {
  TempDir dir;
  ASSERT_EQ(cli("generate additive --coef 1,1,1 --n 100 --out " + q(dir / "f.csv")).code, 0);
  const auto bad = script(dir, "bad.sh", "cat >/dev/null\nexit 4\n");
  const auto r = cli("rank --input " + q(dir / "f.csv") + " --target y --model external --extern-cmd " + q(bad) +
                     " --out " + q(dir / "r.json"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("error [fit]"), std::string::npos) << r.out;
  EXPECT_FALSE(std::filesystem::exists(dir / "r.json"));
  EXPECT_FALSE(std::filesystem::exists(dir / "r.json.tmp"));
}

TEST(Cli, ConfigFilePrecedence) {
  TempDir dir;
  const auto cfg = dir.write("run.cfg", "# defaults\nseed = 5\nn=200\nnoise=1\n");
  ASSERT_EQ(cli("generate friedman1 --config " + q(cfg) + " --out " + q(dir / "a.csv")).code, 0);
  ASSERT_EQ(cli("generate friedman1 --seed 5 --n 200 --noise 1 --out " + q(dir / "b.csv")).code, 0);
  EXPECT_EQ(read_file(dir / "a.csv"), read_file(dir / "b.csv"));
  ASSERT_EQ(cli("generate friedman1 --config " + q(cfg) + " --seed 6 --out " + q(dir / "c.csv")).code, 0);
  ASSERT_EQ(cli("generate friedman1 --seed 6 --n 200 --noise 1 --out " + q(dir / "d.csv")).code, 0);
  EXPECT_EQ(read_file(dir / "c.csv"), read_file(dir / "d.csv"));
  EXPECT_NE(read_file(dir / "a.csv"), read_file(dir / "c.csv"));

  const auto unknown = dir.write("bad.cfg", "colour=blue\n");
  const auto r = cli("generate friedman1 --config " + q(unknown) + " --out " + q(dir / "e.csv"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("colour"), std::string::npos);
}

TEST(Cli, DefaultSeedIsFixed) {
  TempDir dir;
  ASSERT_EQ(cli("generate friedman1 --n 50 --out " + q(dir / "a.csv")).code, 0);
  ASSERT_EQ(cli("generate friedman1 --n 50 --seed 42 --out " + q(dir / "b.csv")).code, 0);
  EXPECT_EQ(read_file(dir / "a.csv"), read_file(dir / "b.csv"));
}
