#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "atomcal/answer.hpp"

namespace atomcal {

enum class Estimator { SelfConsistency, SelfConfidence };
enum class Aggregator { Mean, Max };

std::string_view to_string(Estimator e) noexcept;
std::string_view to_string(Aggregator a) noexcept;
std::optional<Estimator> estimator_from_string(std::string_view s);
std::optional<Aggregator> aggregator_from_string(std::string_view s);

/// One model answer to one paraphrase. `probability` is p(answer) for the
/// predicted class and is only present in gray-box runs.
struct AnswerSample {
  int question_index = 0;
  Answer answer = Answer::Unparseable;
  std::optional<double> probability;

  bool operator==(const AnswerSample&) const = default;
};

struct ConfidenceResult {
  Answer majority = Answer::No;
  double score = 0.0;
  Estimator estimator = Estimator::SelfConsistency;
  Aggregator aggregator = Aggregator::Mean;
  int n_effective = 0;

  bool operator==(const ConfidenceResult&) const = default;
};

// All functions below ignore Unparseable samples; n is the parseable count.
// Sums are taken over sorted terms, so results are bit-identical under any
// reordering of the input.

/// Argmax of Yes/No counts. Ties go to `original_answer` when it is Yes/No,
/// otherwise to No. Throws Error(NoParseableSamples).
Answer majority_vote(std::span<const AnswerSample> samples, std::optional<Answer> original_answer = std::nullopt);

/// (1/n) * #{i : a_i == majority}. Throws Error(EmptySampleSet).
double self_consistency(std::span<const AnswerSample> samples, Answer majority);

/// (1/n) * sum over agreeing samples of p(a_i). Throws Error(EmptySampleSet)
/// or Error(MissingProbability).
double self_confidence(std::span<const AnswerSample> samples, Answer majority);

/// Per-sample probability of `cls` (p if a_i == cls, else 1 - p), reduced by
/// mean or max over the samples.
double class_score(std::span<const AnswerSample> samples, Answer cls, Aggregator aggregator);

/// Self-consistency: majority vote scored by self_consistency. Self-confidence:
/// argmax of class_score (same tie rule as majority_vote) scored by
/// self_confidence against that answer.
ConfidenceResult select_answer(std::span<const AnswerSample> samples, Estimator estimator, Aggregator aggregator,
                               std::optional<Answer> original_answer = std::nullopt);

}  // namespace atomcal
