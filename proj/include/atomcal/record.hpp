#pragma once

#include <optional>
#include <string>
#include <vector>

#include "atomcal/confidence.hpp"
#include "atomcal/query_gen.hpp"

namespace atomcal {

/// Everything gathered for one atomic query: the paraphrases actually asked,
/// the raw and normalized answers, and the selected answer with its score.
/// `result` is empty when no sample was parseable.
struct VerificationRecord {
  AtomicQuery query;
  std::vector<std::string> paraphrases;
  std::vector<std::string> raw_answers;  // parallel to samples
  std::vector<AnswerSample> samples;
  std::optional<ConfidenceResult> result;

  bool operator==(const VerificationRecord&) const = default;
};

}  // namespace atomcal
