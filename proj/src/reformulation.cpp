#include "atomcal/reformulation.hpp"

#include <cctype>
#include <map>
#include <regex>
#include <set>

#include "atomcal/text.hpp"

namespace atomcal {

namespace {

constexpr std::string_view kPromptIntro =
    "Paraphrase the following question about an image maintaining the exact same meaning. You must keep the "
    "entity names in the paraphrased questions the same as in the input question to prevent any ambiguity. "
    "Ensure each generated question is easily understandable and can be answered with \"yes\" or \"no.\" "
    "Generate ";

constexpr std::string_view kPromptSlotOpen =
    " distinct paraphrased versions of the question.\n"
    "\n"
    "Input question:\n"
    "```\n";

constexpr std::string_view kPromptTail =
    "\n```\n"
    "\n"
    "Directly provide your paraphrased questions in a numbered list without any explanations.";

}  // namespace

std::string build_paraphrase_prompt(const AtomicQuery& query, int n) {
  if (n < 1) throw Error(ErrorCode::SchemaError, "paraphrase count must be >= 1");
  std::string p(kPromptIntro);
  p += std::to_string(n);
  p += kPromptSlotOpen;
  p += text::escape_fenced(text::trim(query.text));
  p += kPromptTail;
  return p;
}

std::string extract_paraphrase_question(std::string_view prompt) {
  const auto start = prompt.find(kPromptSlotOpen);
  const auto end = prompt.rfind(kPromptTail);
  if (!prompt.starts_with(kPromptIntro) || start == std::string_view::npos || end == std::string_view::npos ||
      end < start + kPromptSlotOpen.size()) {
    throw Error(ErrorCode::ParseError, "not a paraphrase prompt");
  }
  const auto body = prompt.substr(start + kPromptSlotOpen.size(), end - start - kPromptSlotOpen.size());
  return text::unescape_fenced(body);
}

TooFewParaphrasesError::TooFewParaphrasesError(std::vector<std::string> valid, int expected)
    : Error(ErrorCode::TooFewParaphrases,
            "got " + std::to_string(valid.size()) + " usable paraphrases, expected " + std::to_string(expected)),
      valid_(std::move(valid)) {}

namespace {

std::string clean_item(std::string_view raw) {
  std::string s(text::trim(raw));
  // Markdown emphasis and wrapping quotes are presentation, not content.
  while (s.size() >= 4 && s.starts_with("**") && s.ends_with("**")) s = std::string(text::trim(s.substr(2, s.size() - 4)));
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
    s = std::string(text::trim(s.substr(1, s.size() - 2)));
  }
  return text::ascii_quotes(s);
}

}  // namespace

ParaphraseParse parse_paraphrases_lenient(std::string_view llm_output, int expected_n) {
  if (expected_n < 1) throw Error(ErrorCode::SchemaError, "expected_n must be >= 1");
  static const std::regex kItem(R"(^\s*(\d{1,9})\s*[.)]\s+(.*\S)\s*$)");
  ParaphraseParse out;
  std::set<std::string> seen;
  for (const auto& line : text::split_lines(llm_output)) {
    std::smatch m;
    if (!std::regex_match(line, m, kItem)) continue;
    ++out.numbered_lines;
    std::string item = clean_item(m[2].str());
    if (!seen.insert(text::normalize_for_compare(item)).second) {
      ++out.duplicates;
      continue;
    }
    if (!validate_positive_binary(item).empty()) {
      ++out.invalid;
      continue;
    }
    if (static_cast<int>(out.paraphrases.size()) < expected_n) out.paraphrases.push_back(std::move(item));
  }
  if (out.numbered_lines == 0) throw Error(ErrorCode::NoNumberedList, "LLM output contains no numbered list");
  return out;
}

std::vector<std::string> parse_paraphrases(std::string_view llm_output, int expected_n) {
  auto parsed = parse_paraphrases_lenient(llm_output, expected_n);
  if (static_cast<int>(parsed.paraphrases.size()) < expected_n) {
    throw TooFewParaphrasesError(std::move(parsed.paraphrases), expected_n);
  }
  return std::move(parsed.paraphrases);
}

std::string render_numbered_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += std::to_string(i + 1) + ". " + items[i] + "\n";
  return out;
}

std::string_view to_string(ParaphraseRule r) noexcept {
  switch (r) {
    case ParaphraseRule::Duplicate: return "duplicate";
    case ParaphraseRule::NotPositiveBinary: return "not_positive_binary";
    case ParaphraseRule::MissingEntity: return "missing_entity";
  }
  return "duplicate";
}

namespace {

const std::set<std::string, std::less<>> kDeterminers = {
    "a",   "an",  "the",   "this",  "that",  "these", "those", "any",  "some", "there", "his",  "her",
    "its", "their", "one", "two",   "three", "four",  "five",  "six",  "seven", "eight", "nine", "ten", "several", "many"};

const std::set<std::string, std::less<>> kStopwords = {
    "a",      "an",     "the",    "this",   "that",    "these",  "those",  "any",     "some",   "there",
    "is",     "are",    "was",    "were",   "be",      "been",   "being",  "do",      "does",   "did",
    "can",    "could",  "has",    "have",   "had",     "will",   "would",  "should",  "may",    "might",
    "in",     "on",     "at",     "of",     "to",      "for",    "with",   "from",    "by",     "into",
    "onto",   "near",   "under",  "over",   "above",   "below",  "behind", "beside",  "between", "inside",
    "outside", "next",  "and",    "or",     "but",     "it",     "they",   "he",      "she",    "you",
    "image",  "picture", "photo", "photograph", "scene", "visible", "shown", "present", "see",  "depicted",
    "his",    "her",    "its",    "their",  "one",     "two",    "three",  "four",    "five",   "six",
    "seven",  "eight",  "nine",   "ten",    "several", "many",   "any",    "what",    "which",  "who",
    "where",  "how",    "as",     "than",   "if",      "so",     "very",   "also",    "other"};

bool is_number(std::string_view t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); });
}

bool token_matches(std::string_view term, std::string_view tok) {
  if (tok == term) return true;
  auto plural_of = [](std::string_view a, std::string_view b) {
    return (a.size() == b.size() + 1 && a.ends_with('s') && a.starts_with(b)) ||
           (a.size() == b.size() + 2 && a.ends_with("es") && a.starts_with(b));
  };
  return plural_of(tok, term) || plural_of(term, tok);
}

}  // namespace

std::vector<std::string> entity_terms(std::string_view question) {
  const auto cased = text::word_tokens_cased(question);
  std::vector<std::string> lower;
  for (const auto& t : cased) lower.push_back(text::to_lower(t));

  std::vector<std::string> terms;
  auto add = [&](const std::string& t) {
    if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
  };
  for (std::size_t i = 1; i < cased.size(); ++i) {
    const auto& t = cased[i];
    if (std::isupper(static_cast<unsigned char>(t.front())) && !kStopwords.contains(lower[i])) add(lower[i]);
  }
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!kDeterminers.contains(lower[i]) && !is_number(lower[i])) continue;
    std::size_t j = i + 1;
    std::vector<std::string> run;
    while (j < lower.size() && !kStopwords.contains(lower[j]) && !is_number(lower[j]) && !lower[j].ends_with("ing")) {
      run.push_back(lower[j]);
      ++j;
    }
    if (!run.empty()) {
      add(run.front());
      add(run.back());
    }
  }
  return terms;
}

std::vector<ParaphraseViolation> validate_paraphrase_set(const ParaphraseSet& set) {
  std::vector<ParaphraseViolation> out;
  std::map<std::string, int> counts;
  for (const auto& p : set.paraphrases) ++counts[text::normalize_for_compare(p)];
  const auto terms = entity_terms(set.source.text);

  for (const auto& p : set.paraphrases) {
    if (counts[text::normalize_for_compare(p)] > 1) {
      out.push_back({p, ParaphraseRule::Duplicate, "duplicate after normalization"});
    }
    for (const auto& v : validate_positive_binary(p)) {
      out.push_back({p, ParaphraseRule::NotPositiveBinary, std::string(to_string(v.rule))});
    }
    const auto toks = text::word_tokens(p);
    for (const auto& term : terms) {
      const bool found = std::any_of(toks.begin(), toks.end(), [&](const std::string& t) { return token_matches(term, t); });
      if (!found) out.push_back({p, ParaphraseRule::MissingEntity, "entity '" + term + "' missing"});
    }
  }
  return out;
}

}  // namespace atomcal
