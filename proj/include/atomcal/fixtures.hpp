#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "atomcal/dataset.hpp"

namespace atomcal {

/// Deterministic mock-backend scenarios for tests and demos.
///
/// passthrough_pope: existence questions answered mostly correctly.
/// generative_caption: captions with one hallucinated object each; the
///   scripted refiner removes objects the verification step rejects.
/// yes_biased_model: balanced gold labels. The direct answer says Yes with
///   probability 0.5 + bias regardless of the image. Each item gets a
///   reliability r ~ U(0.5, 1); every paraphrase is answered correctly with
///   probability r, with no preference for Yes, and reports p(answer) = r.
///   Voting over paraphrases therefore removes most of the Yes bias, and
///   wrong votes concentrate on low-r items where answers disagree.
struct FixtureOptions {
  std::string scenario;
  std::uint64_t seed = 7;
  std::optional<int> examples;  // scenario default when unset
  double bias = 0.2;            // yes_biased_model only
  int paraphrases = 10;
};

struct FixtureSet {
  std::vector<DatasetExample> dataset;
  nlohmann::json mllm_script;
  nlohmann::json llm_script;
  nlohmann::json config;  // refers to the files written by write_fixture
  std::optional<nlohmann::json> lexicon;
};

const std::vector<std::string>& fixture_scenarios();

/// Throws Error(UnknownScenario) or Error(ConfigError) for bad options.
FixtureSet make_fixture(const FixtureOptions& options);

/// Writes dataset.jsonl, mllm_script.json, llm_script.json, config.json and,
/// when present, lexicon.json into `dir` (created if missing).
void write_fixture(const FixtureSet& fixture, const std::filesystem::path& dir);

}  // namespace atomcal
