#include <gtest/gtest.h>

#include "atomcal/artifact.hpp"
#include "atomcal/config.hpp"
#include "atomcal/dataset.hpp"
#include "atomcal/fixtures.hpp"
#include "atomcal/mock_backend.hpp"
#include "atomcal/pipeline.hpp"
#include "atomcal/reformulation.hpp"
#include "atomcal/refinement.hpp"
#include "test_util.hpp"

using namespace atomcal;
using atomcal::testing::TempDir;

namespace {

GatewayOptions quiet() {
  GatewayOptions o;
  o.sleeper = [](std::chrono::milliseconds) {};
  return o;
}

struct Loaded {
  Config config;
  std::vector<DatasetExample> dataset;
};

Loaded load_fixture(const std::string& scenario, const TempDir& dir, std::optional<int> examples = std::nullopt) {
  FixtureOptions o;
  o.scenario = scenario;
  o.examples = examples;
  write_fixture(make_fixture(o), dir.path());
  return {load_config(dir / "config.json"), load_dataset(dir / "dataset.jsonl", DatasetFormat::Unified)};
}

std::unique_ptr<Gateway> gateway_for(Config config, CacheMode mode, const std::filesystem::path& cache) {
  config.pipeline.cache_mode = mode;
  config.cache_path = cache;
  return make_gateway(config, [](std::chrono::milliseconds) {});
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Pipeline, PassthroughCallCount) {
  TempDir dir;
  auto fx = load_fixture("passthrough_pope", dir, 12);
  auto gw = make_gateway(fx.config, [](std::chrono::milliseconds) {});
  const int n = fx.config.pipeline.n_paraphrases;
  for (const auto& ex : fx.dataset) {
    const auto a = run_example(ex, fx.config.pipeline, *gw);
    EXPECT_TRUE(a.passthrough);
    EXPECT_EQ(a.gateway_calls, 1 + 1 + n) << ex.example_id;
    ASSERT_EQ(a.records.size(), 1u);
    EXPECT_EQ(a.records[0].samples.size(), static_cast<std::size_t>(n));
    ASSERT_TRUE(a.final_answer);
    EXPECT_TRUE(*a.final_answer == "Yes" || *a.final_answer == "No");
    EXPECT_EQ(artifact_from_json(to_json(a)), a);
  }
}

TEST(Pipeline, GenerativeCallCountAndRefinement) {
  TempDir dir;
  auto fx = load_fixture("generative_caption", dir, 3);
  auto gw = make_gateway(fx.config, [](std::chrono::milliseconds) {});
  const int n = fx.config.pipeline.n_paraphrases;
  for (const auto& ex : fx.dataset) {
    const auto a = run_example(ex, fx.config.pipeline, *gw);
    EXPECT_FALSE(a.passthrough);
    const int k = static_cast<int>(a.queries.size());
    EXPECT_GT(k, 0);
    EXPECT_EQ(a.gateway_calls, 1 + 2 + k + k * n + 1);
    EXPECT_FALSE(a.context.empty());
    EXPECT_TRUE(a.final_answer);
    EXPECT_NE(a.final_answer, a.initial_answer);
  }
}

TEST(Pipeline, RefinerReceivesFlippedAnswer) {
  const std::string image = name_digest("x.jpg");
  const std::string question = "Describe the image.";
  const std::string initial = "Two dogs and a cat sit on a sofa.";
  const auto& ex_shots = Exemplars::defaults();

  auto mllm = std::make_shared<MockBackend>();
  auto llm = std::make_shared<MockBackend>();
  mllm->script(question, initial, std::nullopt, image);
  const std::string tuple_out = "1 | entity - whole (dogs)\n2 | attribute - count (dogs, two)\n3 | entity - whole (cat)\n";
  llm->script(build_tuple_prompt(question, initial, ex_shots.tuple_shots), tuple_out);
  llm->script(build_question_prompt(parse_tuples(tuple_out), question, ex_shots.question_shots),
              "1 | Are there dogs?\n2 | Are there two dogs?\n3 | Is there a cat?\n");

  const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> plan = {
      {"Are there dogs?",
       {{"Are there dogs in the image?", "Yes"}, {"Are dogs visible in the image?", "Yes"}, {"Can dogs be seen?", "Yes."}}},
      {"Are there two dogs?",
       {{"Are two dogs in the image?", "No"}, {"Does the image show two dogs?", "No, only one."}, {"Can two dogs be seen?", "Yes"}}},
      {"Is there a cat?",
       {{"Is a cat in the image?", "Yes"}, {"Does the image contain a cat?", "Yes"}, {"Can a cat be seen?", "No"}}},
  };
  int id = 0;
  for (const auto& [q, items] : plan) {
    std::vector<std::string> paraphrases;
    for (const auto& [p, answer] : items) {
      paraphrases.push_back(p);
      mllm->script(p, answer, std::nullopt, image);
    }
    llm->script(build_paraphrase_prompt(AtomicQuery{++id, q, std::nullopt, false}, 3), render_numbered_list(paraphrases));
  }
  const VerificationContext expected_ctx{{{"Are there dogs?", Answer::Yes, 1.0},
                                          {"Are there two dogs?", Answer::No, 2.0 / 3.0},
                                          {"Is there a cat?", Answer::Yes, 2.0 / 3.0}}};
  llm->script(build_refine_prompt(question, initial, expected_ctx), "One dog and a cat sit on a sofa.");

  Gateway gw(quiet());
  gw.register_backend("mllm", mllm, BackendKind::Mllm);
  gw.register_backend("llm", llm, BackendKind::Llm);
  PipelineConfig cfg;
  cfg.n_paraphrases = 3;
  DatasetExample ex;
  ex.example_id = "e1";
  ex.image = "x.jpg";
  ex.image_ref = image;
  ex.question = question;

  const auto a = run_example(ex, cfg, gw);
  EXPECT_TRUE(a.flags.empty()) << nlohmann::json(a.flags).dump();
  ASSERT_EQ(a.queries.size(), 3u);
  EXPECT_EQ(a.queries[1].source_tuple->argument, "dogs, two");
  EXPECT_EQ(a.context, expected_ctx);
  EXPECT_EQ(a.final_answer, "One dog and a cat sit on a sofa.");
  EXPECT_EQ(a.gateway_calls, 1 + 2 + 3 + 9 + 1);
  for (const auto& r : llm->requests()) EXPECT_FALSE(r.image_ref);
  for (const auto& r : mllm->requests()) EXPECT_EQ(r.image_ref, image);
}

TEST(Pipeline, ParaphraseFailureFallsBackToInitialAnswer) {
  const std::string image = name_digest("y.jpg");
  auto mllm = std::make_shared<MockBackend>();
  auto llm = std::make_shared<MockBackend>();
  mllm->script("Is there a dog?", "Yes, there is a dog.", std::nullopt, image);
  llm->set_default({"I cannot help with that.", std::nullopt, 0});
  Gateway gw(quiet());
  gw.register_backend("mllm", mllm, BackendKind::Mllm);
  gw.register_backend("llm", llm, BackendKind::Llm);
  DatasetExample ex;
  ex.example_id = "p";
  ex.image_ref = image;
  ex.question = "Is there a dog?";
  const auto a = run_example(ex, PipelineConfig{}, gw);
  EXPECT_TRUE(a.passthrough);
  EXPECT_TRUE(a.has_flag("paraphrase_failed"));
  EXPECT_TRUE(a.has_flag("fallback_initial"));
  EXPECT_EQ(a.final_answer, "Yes");
  EXPECT_FALSE(a.error);
}

TEST(Pipeline, InitialAnswerFailureIsRecorded) {
  auto mllm = std::make_shared<MockBackend>();
  auto llm = std::make_shared<MockBackend>();
  Gateway gw(quiet());
  gw.register_backend("mllm", mllm, BackendKind::Mllm);
  gw.register_backend("llm", llm, BackendKind::Llm);
  DatasetExample ex;
  ex.example_id = "f";
  ex.image_ref = name_digest("z.jpg");
  ex.question = "Describe the image.";
  const auto a = run_example(ex, PipelineConfig{}, gw);
  EXPECT_TRUE(a.failed());
  EXPECT_TRUE(a.has_flag("initial_answer_failed"));
  EXPECT_TRUE(a.error);
}

TEST(Pipeline, ReplayIsByteIdenticalAcrossParallelism) {
  TempDir dir;
  auto fx = load_fixture("passthrough_pope", dir, 20);
  {
    auto gw = gateway_for(fx.config, CacheMode::Record, dir / "cache.jsonl");
    run_dataset(fx.dataset, fx.config.pipeline, *gw, dir / "record.jsonl");
  }
  std::vector<std::string> outputs;
  for (int par : {1, 8}) {
    auto cfg = fx.config;
    cfg.pipeline.parallelism = par;
    auto gw = gateway_for(cfg, CacheMode::ReplayStrict, dir / "cache.jsonl");
    const auto out = dir / ("replay" + std::to_string(par) + ".jsonl");
    const auto summary = run_dataset(fx.dataset, cfg.pipeline, *gw, out);
    EXPECT_EQ(summary.executed, 20);
    EXPECT_TRUE(summary.failures.empty());
    outputs.push_back(atomcal::testing::slurp(out));
  }
  EXPECT_EQ(outputs[0], outputs[1]);
  EXPECT_EQ(outputs[0], atomcal::testing::slurp(dir / "record.jsonl"));
  EXPECT_EQ(count_lines(outputs[0]), 20);
}

TEST(Pipeline, StrictReplayMissStopsTheRun) {
  TempDir dir;
  auto fx = load_fixture("passthrough_pope", dir, 3);
  auto gw = gateway_for(fx.config, CacheMode::ReplayStrict, dir / "empty.jsonl");
  try {
    run_dataset(fx.dataset, fx.config.pipeline, *gw, dir / "out.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CacheMissInStrictReplay);
  }
}

TEST(Pipeline, ResumeRunsOnlyMissingExamples) {
  TempDir dir;
  auto fx = load_fixture("passthrough_pope", dir, 10);
  auto gw = make_gateway(fx.config, [](std::chrono::milliseconds) {});
  const auto out = dir / "out.jsonl";
  const std::vector<DatasetExample> first_six(fx.dataset.begin(), fx.dataset.begin() + 6);
  run_dataset(first_six, fx.config.pipeline, *gw, out);
  // Simulate a crash in the middle of writing the seventh line.
  const std::string complete = atomcal::testing::slurp(out);
  atomcal::testing::spit(out, complete + "{\"schema_version\":1,\"example_id\":\"tor");

  RunOptions opts;
  opts.resume = true;
  const auto summary = run_dataset(fx.dataset, fx.config.pipeline, *gw, out, opts);
  EXPECT_EQ(summary.skipped, 6);
  EXPECT_EQ(summary.executed, 4);
  EXPECT_TRUE(summary.torn_tail_dropped);
  const auto file = read_artifacts(out);
  EXPECT_FALSE(file.torn_tail);
  ASSERT_EQ(file.artifacts.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(file.artifacts[i].example_id, fx.dataset[i].example_id);

  const auto again = run_dataset(fx.dataset, fx.config.pipeline, *gw, out, opts);
  EXPECT_EQ(again.executed, 0);
  EXPECT_EQ(again.skipped, 10);
}

TEST(Pipeline, OutputOrderFollowsInput) {
  TempDir dir;
  auto fx = load_fixture("passthrough_pope", dir, 16);
  auto cfg = fx.config;
  cfg.pipeline.parallelism = 4;
  auto gw = make_gateway(cfg, [](std::chrono::milliseconds) {});
  std::vector<std::string> seen;
  RunOptions opts;
  opts.on_artifact = [&](const RunArtifact& a) { seen.push_back(a.example_id); };
  run_dataset(fx.dataset, cfg.pipeline, *gw, dir / "out.jsonl", opts);
  ASSERT_EQ(seen.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(seen[i], fx.dataset[i].example_id);
}

TEST(Pipeline, SelfConfidenceUsesProbabilities) {
  TempDir dir;
  auto fx = load_fixture("yes_biased_model", dir, 20);
  auto cfg = fx.config;
  cfg.pipeline.estimator = Estimator::SelfConfidence;
  auto gw = make_gateway(cfg, [](std::chrono::milliseconds) {});
  for (const auto& ex : fx.dataset) {
    const auto a = run_example(ex, cfg.pipeline, *gw);
    ASSERT_EQ(a.records.size(), 1u);
    for (const auto& s : a.records[0].samples) {
      if (s.answer != Answer::Unparseable) EXPECT_TRUE(s.probability);
    }
    ASSERT_TRUE(a.records[0].result);
    EXPECT_EQ(a.records[0].result->estimator, Estimator::SelfConfidence);
  }
}

TEST(Config, ValidationAndEnvInterpolation) {
  PipelineConfig c;
  c.n_paraphrases = 0;
  EXPECT_ANY_THROW(c.validate());
  c = {};
  c.llm_backend = c.mllm_backend;
  EXPECT_ANY_THROW(c.validate());
  ::setenv("ATOMCAL_TEST_URL", "http://127.0.0.1:9", 1);
  const auto j = interpolate_env(nlohmann::json{{"url", "${ATOMCAL_TEST_URL}/v1"}, {"x", "${ATOMCAL_UNSET_VAR:-fallback}"}});
  EXPECT_EQ(j["url"], "http://127.0.0.1:9/v1");
  EXPECT_EQ(j["x"], "fallback");
  EXPECT_ANY_THROW(interpolate_env(nlohmann::json{{"x", "${ATOMCAL_UNSET_VAR}"}}));
  EXPECT_ANY_THROW(config_from_json(nlohmann::json{{"bogus_key", 1}}, "."));
}
