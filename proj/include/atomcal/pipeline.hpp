#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "atomcal/artifact.hpp"
#include "atomcal/config.hpp"
#include "atomcal/dataset.hpp"
#include "atomcal/gateway.hpp"
#include "atomcal/query_gen.hpp"

namespace atomcal {

/// Flag names written into RunArtifact::flags. Per-query flags carry a
/// ":<query id>" suffix.
namespace flags {
inline constexpr std::string_view kPrecomputedInitial = "precomputed_initial";
inline constexpr std::string_view kInitialAnswerFailed = "initial_answer_failed";
inline constexpr std::string_view kQueryGenerationFailed = "query_generation_failed";
inline constexpr std::string_view kTupleLinesSkipped = "tuple_lines_skipped";
inline constexpr std::string_view kNoTuples = "no_tuples";
inline constexpr std::string_view kQuestionLinesSkipped = "question_lines_skipped";
inline constexpr std::string_view kQuestionsRepaired = "questions_repaired";
inline constexpr std::string_view kQuestionsDropped = "questions_dropped";
inline constexpr std::string_view kNoAtomicQueries = "no_atomic_queries";
inline constexpr std::string_view kParaphraseFailed = "paraphrase_failed";
inline constexpr std::string_view kParaphraseShortfall = "paraphrase_shortfall";
inline constexpr std::string_view kAnswerFailed = "answer_failed";
inline constexpr std::string_view kMissingProbabilities = "missing_probabilities";
inline constexpr std::string_view kNoParseableSamples = "no_parseable_samples";
inline constexpr std::string_view kFallbackInitial = "fallback_initial";
inline constexpr std::string_view kEmptyContext = "empty_context";
inline constexpr std::string_view kRefineFailed = "refine_failed";
inline constexpr std::string_view kEmptyRefinement = "empty_refinement";
}  // namespace flags

/// Runs every stage for one example. Stage failures become flags; the
/// artifact has no final answer only when none can be produced. Strict-replay
/// cache misses and unknown backends are rethrown.
RunArtifact run_example(const DatasetExample& example, const PipelineConfig& config, Gateway& gateway,
                        const Exemplars& exemplars = Exemplars::defaults());

struct ExampleFailure {
  std::string example_id;
  std::string error;
};

struct RunSummary {
  long examples = 0;   // in the dataset
  long executed = 0;   // run in this invocation
  long skipped = 0;    // already present in the output file
  std::vector<ExampleFailure> failures;
  std::uint64_t gateway_calls = 0;
  double wall_time_s = 0.0;
  bool torn_tail_dropped = false;
};

struct RunOptions {
  bool resume = false;
  const Exemplars* exemplars = nullptr;  // defaults when null
  /// Called from the writer, in output order.
  std::function<void(const RunArtifact&)> on_artifact;
};

/// Runs the dataset with `config.parallelism` workers and writes one JSONL
/// artifact per example to `out`, in input order. With `resume`, examples
/// already in `out` are skipped and a torn final line is dropped first.
RunSummary run_dataset(const std::vector<DatasetExample>& dataset, const PipelineConfig& config, Gateway& gateway,
                       const std::filesystem::path& out, const RunOptions& options = {});

}  // namespace atomcal
