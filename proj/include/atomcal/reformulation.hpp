#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "atomcal/error.hpp"
#include "atomcal/query_gen.hpp"

namespace atomcal {

inline constexpr int kDefaultParaphraseCount = 10;

struct ParaphraseSet {
  AtomicQuery source;
  std::vector<std::string> paraphrases;
  int n = kDefaultParaphraseCount;

  bool operator==(const ParaphraseSet&) const = default;
};

/// The paraphrase prompt asking for `n` versions, with the question in its
/// fenced slot. Backticks in the question are escaped;
/// extract_paraphrase_question() inverts this.
std::string build_paraphrase_prompt(const AtomicQuery& query, int n = kDefaultParaphraseCount);
std::string extract_paraphrase_question(std::string_view prompt);

/// Thrown when fewer than the requested number of usable paraphrases were
/// found. The usable ones are kept on the exception.
class TooFewParaphrasesError : public Error {
public:
  TooFewParaphrasesError(std::vector<std::string> valid, int expected);
  const std::vector<std::string>& valid() const noexcept { return valid_; }

private:
  std::vector<std::string> valid_;
};

struct ParaphraseParse {
  std::vector<std::string> paraphrases;  // in list order, at most expected_n
  int numbered_lines = 0;
  int duplicates = 0;
  int invalid = 0;
};

/// Extracts "k. text" / "k) text" items, drops duplicates and items that fail
/// validate_positive_binary, and keeps at most expected_n. Throws
/// Error(NoNumberedList) when there are no numbered items at all.
ParaphraseParse parse_paraphrases_lenient(std::string_view llm_output, int expected_n);

/// As above but throws TooFewParaphrasesError on a shortfall.
std::vector<std::string> parse_paraphrases(std::string_view llm_output, int expected_n);

/// Inverse of the parser's input format, for tests and fixtures.
std::string render_numbered_list(const std::vector<std::string>& items);

enum class ParaphraseRule { Duplicate, NotPositiveBinary, MissingEntity };

std::string_view to_string(ParaphraseRule r) noexcept;

struct ParaphraseViolation {
  std::string paraphrase;
  ParaphraseRule rule;
  std::string detail;

  bool operator==(const ParaphraseViolation&) const = default;
};

/// Terms every paraphrase must keep: non-initial capitalized words plus the
/// first and last word of each noun run that follows a determiner, numeral
/// or "there". Lowercased.
std::vector<std::string> entity_terms(std::string_view question);

/// Violations for every paraphrase; duplicates are reported on every member
/// of the duplicate group, so the result does not depend on list order.
std::vector<ParaphraseViolation> validate_paraphrase_set(const ParaphraseSet& set);

}  // namespace atomcal
