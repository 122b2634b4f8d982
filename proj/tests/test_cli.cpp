#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "atomcal/artifact.hpp"
#include "atomcal/cli.hpp"
#include "atomcal/dataset.hpp"
#include "test_util.hpp"

using namespace atomcal;
using atomcal::testing::TempDir;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitUsage);
  const auto r = run_cli({"run"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("--config"), std::string::npos);
  TempDir dir;
  EXPECT_EQ(run_cli({"fixtures", "--scenario", "nope", "--out", dir.path().string()}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kExitOk);
}

TEST(Cli, FixtureRunEvalStats) {
  TempDir dir;
  const std::string fx = (dir / "fx").string();
  ASSERT_EQ(run_cli({"fixtures", "--scenario", "generative_caption", "--out", fx}).code, 0);
  const std::string arts = (dir / "arts.jsonl").string();
  auto r = run_cli({"run", "--config", fx + "/config.json", "--dataset", fx + "/dataset.jsonl", "--out", arts});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(atomcal::testing::slurp(arts)), 10);
  EXPECT_EQ(json::parse(r.out)["executed"], 10);

  r = run_cli({"eval", "--artifacts", arts, "--dataset", fx + "/dataset.jsonl", "--metrics", "amber"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  r = run_cli({"eval", "--artifacts", arts, "--dataset", fx + "/dataset.jsonl", "--metrics", "amber", "--lexicon",
               fx + "/lexicon.json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = json::parse(r.out);
  EXPECT_LT(report["final"]["amber"]["chair"].get<double>(), report["direct"]["amber"]["chair"].get<double>());
}

TEST(Cli, EvalKnownConfusion) {
  TempDir dir;
  // (TP, FP, FN, TN) = (2, 1, 1, 2)
  const std::vector<std::pair<std::string, std::string>> rows{{"Yes", "Yes"}, {"Yes", "Yes"}, {"Yes", "No"},
                                                              {"No", "Yes"},  {"No", "No"},   {"No", "No"}};
  std::vector<DatasetExample> dataset;
  std::string lines;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    DatasetExample ex;
    ex.example_id = "e" + std::to_string(i);
    ex.image = "img.jpg";
    ex.image_ref = name_digest("img.jpg");
    ex.question = "Is there a dog?";
    ex.gold = rows[i].second == "Yes" ? Answer::Yes : Answer::No;
    dataset.push_back(ex);
    RunArtifact a;
    a.example_id = ex.example_id;
    a.question = ex.question;
    a.image_ref = ex.image_ref;
    a.passthrough = true;
    a.initial_answer = "Yes";
    a.final_answer = rows[i].first;
    lines += serialize_artifact(a) + "\n";
  }
  write_unified(dir / "data.jsonl", dataset);
  atomcal::testing::spit(dir / "arts.jsonl", lines);
  auto r = run_cli({"eval", "--artifacts", (dir / "arts.jsonl").string(), "--dataset", (dir / "data.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = json::parse(r.out);
  EXPECT_NEAR(report["final"]["pope"]["overall"]["accuracy"].get<double>(), 0.6667, 1e-4);
  EXPECT_NEAR(report["final"]["pope"]["overall"]["f1"].get<double>(), 0.6667, 1e-4);
  EXPECT_EQ(report["final"]["pope"]["confusion"]["fp"], 1);
  EXPECT_NEAR(report["direct"]["bias"]["pct_diff"].get<double>(), 0.5, 1e-12);

  const std::string out = (dir / "report.json").string();
  r = run_cli({"eval", "--artifacts", (dir / "arts.jsonl").string(), "--dataset", (dir / "data.jsonl").string(), "--out", out});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("accuracy"), std::string::npos);
  EXPECT_EQ(json::parse(atomcal::testing::slurp(out)), report);

  atomcal::testing::spit(dir / "empty.jsonl", "");
  EXPECT_EQ(run_cli({"eval", "--artifacts", (dir / "empty.jsonl").string(), "--dataset", (dir / "data.jsonl").string()}).code,
            cli::kExitError);
}

TEST(Cli, StatsOnBiasedFixture) {
  TempDir dir;
  const std::string fx = (dir / "fx").string();
  ASSERT_EQ(run_cli({"fixtures", "--scenario", "yes_biased_model", "--out", fx}).code, 0);
  const std::string arts = (dir / "arts.jsonl").string();
  ASSERT_EQ(run_cli({"run", "--config", fx + "/config.json", "--dataset", fx + "/dataset.jsonl", "--out", arts}).code, 0);
  const auto r = run_cli({"stats", "--artifacts", arts, "--dataset", fx + "/dataset.jsonl"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json s = json::parse(r.out);
  EXPECT_LT(s["variance"]["pbc"]["statistic"].get<double>(), 0.0);
  EXPECT_LT(s["variance"]["welch"]["p_value"].get<double>(), 0.05);
  EXPECT_LT(std::abs(s["yes_bias"]["final"]["pct_diff"].get<double>()),
            std::abs(s["yes_bias"]["direct"]["pct_diff"].get<double>()));
}

TEST(Cli, CacheOperations) {
  TempDir dir;
  const std::string fx = (dir / "fx").string();
  ASSERT_EQ(run_cli({"fixtures", "--scenario", "passthrough_pope", "--examples", "4", "--out", fx}).code, 0);
  const std::string cache = fx + "/cache.jsonl";
  auto r = run_cli({"run", "--config", fx + "/config.json", "--dataset", fx + "/dataset.jsonl", "--out",
                    (dir / "a.jsonl").string(), "--cache-mode", "record"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run_cli({"cache", "verify", "--path", cache});
  ASSERT_EQ(r.code, 0) << r.err;
  const json summary = json::parse(r.out);
  EXPECT_GT(summary["records"].get<int>(), 0);
  EXPECT_EQ(summary["duplicates"], 0);
  r = run_cli({"run", "--config", fx + "/config.json", "--dataset", fx + "/dataset.jsonl", "--out",
               (dir / "b.jsonl").string(), "--cache-mode", "replay_strict"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(atomcal::testing::slurp(dir / "a.jsonl"), atomcal::testing::slurp(dir / "b.jsonl"));

  atomcal::testing::spit(cache, atomcal::testing::slurp(cache) + "{\"torn");
  EXPECT_EQ(run_cli({"cache", "verify", "--path", cache}).code, cli::kExitError);
  EXPECT_EQ(run_cli({"cache", "compact", "--path", cache}).code, 0);
  EXPECT_EQ(run_cli({"cache", "verify", "--path", cache}).code, 0);
  EXPECT_EQ(run_cli({"cache", "explode", "--path", cache}).code, cli::kExitUsage);
}
