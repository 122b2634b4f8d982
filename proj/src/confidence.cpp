#include "atomcal/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "atomcal/error.hpp"

namespace atomcal {

std::string_view to_string(Estimator e) noexcept {
  return e == Estimator::SelfConsistency ? "self_consistency" : "self_confidence";
}

std::string_view to_string(Aggregator a) noexcept { return a == Aggregator::Mean ? "mean" : "max"; }

std::optional<Estimator> estimator_from_string(std::string_view s) {
  if (s == "self_consistency") return Estimator::SelfConsistency;
  if (s == "self_confidence") return Estimator::SelfConfidence;
  return std::nullopt;
}

std::optional<Aggregator> aggregator_from_string(std::string_view s) {
  if (s == "mean") return Aggregator::Mean;
  if (s == "max") return Aggregator::Max;
  return std::nullopt;
}

namespace {

constexpr double kTieTolerance = 1e-12;

bool parseable(const AnswerSample& s) { return s.answer != Answer::Unparseable; }

int parseable_count(std::span<const AnswerSample> samples) {
  return static_cast<int>(std::count_if(samples.begin(), samples.end(), parseable));
}

double checked_probability(const AnswerSample& s) {
  if (!s.probability) throw Error(ErrorCode::MissingProbability, "sample " + std::to_string(s.question_index) + " has no probability");
  const double p = *s.probability;
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::SchemaError, "sample probability outside [0, 1]");
  return p;
}

double sorted_sum(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += t;
  return sum;
}

Answer break_tie(std::optional<Answer> original) {
  if (original && (*original == Answer::Yes || *original == Answer::No)) return *original;
  return Answer::No;
}

}  // namespace

Answer majority_vote(std::span<const AnswerSample> samples, std::optional<Answer> original_answer) {
  int yes = 0;
  int no = 0;
  for (const auto& s : samples) {
    if (s.answer == Answer::Yes) ++yes;
    else if (s.answer == Answer::No) ++no;
  }
  if (yes + no == 0) throw Error(ErrorCode::NoParseableSamples, "no parseable answers to vote on");
  if (yes == no) return break_tie(original_answer);
  return yes > no ? Answer::Yes : Answer::No;
}

double self_consistency(std::span<const AnswerSample> samples, Answer majority) {
  const int n = parseable_count(samples);
  if (n == 0) throw Error(ErrorCode::EmptySampleSet, "no parseable samples");
  const auto agree = std::count_if(samples.begin(), samples.end(), [&](const AnswerSample& s) { return s.answer == majority; });
  return static_cast<double>(agree) / n;
}

double self_confidence(std::span<const AnswerSample> samples, Answer majority) {
  const int n = parseable_count(samples);
  if (n == 0) throw Error(ErrorCode::EmptySampleSet, "no parseable samples");
  std::vector<double> terms;
  for (const auto& s : samples) {
    if (!parseable(s)) continue;
    const double p = checked_probability(s);
    if (s.answer == majority) terms.push_back(p);
  }
  return sorted_sum(std::move(terms)) / n;
}

double class_score(std::span<const AnswerSample> samples, Answer cls, Aggregator aggregator) {
  std::vector<double> per_sample;
  for (const auto& s : samples) {
    if (!parseable(s)) continue;
    const double p = checked_probability(s);
    per_sample.push_back(s.answer == cls ? p : 1.0 - p);
  }
  if (per_sample.empty()) throw Error(ErrorCode::EmptySampleSet, "no parseable samples");
  if (aggregator == Aggregator::Max) return *std::max_element(per_sample.begin(), per_sample.end());
  const auto n = static_cast<double>(per_sample.size());
  return sorted_sum(std::move(per_sample)) / n;
}

ConfidenceResult select_answer(std::span<const AnswerSample> samples, Estimator estimator, Aggregator aggregator,
                               std::optional<Answer> original_answer) {
  ConfidenceResult r;
  r.estimator = estimator;
  r.aggregator = aggregator;
  r.n_effective = parseable_count(samples);
  if (r.n_effective == 0) throw Error(ErrorCode::NoParseableSamples, "no parseable answers");

  if (estimator == Estimator::SelfConsistency) {
    r.majority = majority_vote(samples, original_answer);
    r.score = self_consistency(samples, r.majority);
    return r;
  }
  const double yes = class_score(samples, Answer::Yes, aggregator);
  const double no = class_score(samples, Answer::No, aggregator);
  if (std::abs(yes - no) <= kTieTolerance) r.majority = break_tie(original_answer);
  else r.majority = yes > no ? Answer::Yes : Answer::No;
  r.score = self_confidence(samples, r.majority);
  return r;
}

}  // namespace atomcal
