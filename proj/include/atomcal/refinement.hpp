#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "atomcal/answer.hpp"
#include "atomcal/query_gen.hpp"
#include "atomcal/record.hpp"

namespace atomcal {

struct VerificationEntry {
  std::string question;
  Answer answer = Answer::No;
  double confidence = 0.0;

  bool operator==(const VerificationEntry&) const = default;
};

struct VerificationContext {
  std::vector<VerificationEntry> entries;  // ordered by atomic query id

  bool empty() const { return entries.empty(); }
  /// "Q: ... A: Yes" lines, one per entry. Confidence is not rendered.
  std::string render() const;

  bool operator==(const VerificationContext&) const = default;
};

/// False only for a single passthrough query.
bool should_refine(const std::vector<AtomicQuery>& queries);

/// Keeps records with a selected answer and score >= threshold, sorted by
/// query id. Throws Error(SchemaError) for a threshold outside [0, 1].
VerificationContext format_verification_context(const std::vector<VerificationRecord>& records, double threshold = 0.0);

std::string build_refine_prompt(std::string_view question, std::string_view initial_answer,
                                const VerificationContext& context);

/// The three slots of a refine prompt, unescaped. For tests and fixtures.
struct RefinePromptSlots {
  std::string question;
  std::string initial_answer;
  std::string context;
};
RefinePromptSlots extract_refine_slots(std::string_view prompt);

/// Calls the text-only model. Errors from the call propagate.
using TextModel = std::function<std::string(const std::string& prompt)>;

struct RefineOutcome {
  std::string text;
  bool llm_called = false;
  /// Set when the model returned nothing usable and the initial answer was kept.
  bool empty_refinement = false;
};

/// Returns the initial answer without calling the model when refinement is
/// unnecessary or the context is empty. Otherwise returns the model output
/// with surrounding whitespace and quotes removed.
RefineOutcome refine(std::string_view question, std::string_view initial_answer, const VerificationContext& context,
                     const std::vector<AtomicQuery>& queries, const TextModel& llm);

}  // namespace atomcal
