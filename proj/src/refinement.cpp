#include "atomcal/refinement.hpp"

#include <algorithm>

#include "atomcal/error.hpp"
#include "atomcal/text.hpp"

namespace atomcal {

std::string VerificationContext::render() const {
  std::string out;
  for (const auto& e : entries) {
    if (!out.empty()) out.push_back('\n');
    out += "Q: " + e.question + " A: " + std::string(to_string(e.answer));
  }
  return out;
}

bool should_refine(const std::vector<AtomicQuery>& queries) {
  return !(queries.size() == 1 && queries.front().passthrough);
}

VerificationContext format_verification_context(const std::vector<VerificationRecord>& records, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorCode::SchemaError, "context threshold must be in [0, 1]");
  std::vector<const VerificationRecord*> kept;
  for (const auto& r : records) {
    if (r.result && r.result->score >= threshold) kept.push_back(&r);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto* a, const auto* b) { return a->query.id < b->query.id; });
  VerificationContext ctx;
  for (const auto* r : kept) ctx.entries.push_back({r->query.text, r->result->majority, r->result->score});
  return ctx;
}

namespace {

constexpr std::string_view kRefineInstructions =
    "Given a VQA question-answer pair, refine the model's initial answer using the context of verification "
    "questions and their ground truth answers. Preserve the model's answer if the verification context confirms "
    "that the final answer is correct, even if the model's reasoning is flawed. Only revise the model's answer if "
    "the verification context provides highly specific and directly relevant evidence that the final answer itself "
    "is incorrect. If no sufficiently relevant verification questions are available, return the initial answer as "
    "the output. Ensure that all output text is derived from the initial answer or the provided context; do not "
    "generate any new, unverified information.\n\n";

constexpr std::string_view kQuestionOpen = "Question: \"";
constexpr std::string_view kAnswerOpen = "\"\n\nModel's initial answer: \"";
constexpr std::string_view kContextOpen = "\"\n\nVerification context:\n```\n";
constexpr std::string_view kContextClose = "\n```\n\nProvide only the revised answer without any explanation or additional text.";

}  // namespace

std::string build_refine_prompt(std::string_view question, std::string_view initial_answer,
                                const VerificationContext& context) {
  std::string p(kRefineInstructions);
  p += kQuestionOpen;
  p += text::escape_quoted(question);
  p += kAnswerOpen;
  p += text::escape_quoted(initial_answer);
  p += kContextOpen;
  p += text::escape_fenced(context.render());
  p += kContextClose;
  return p;
}

RefinePromptSlots extract_refine_slots(std::string_view prompt) {
  const auto q = prompt.find(kQuestionOpen);
  if (q == std::string_view::npos) throw Error(ErrorCode::ParseError, "not a refine prompt");
  const auto q_begin = q + kQuestionOpen.size();
  // Slots are escaped, so the first unescaped closing sequence ends each one.
  auto find_close = [&](std::size_t from, std::string_view close) {
    for (auto pos = prompt.find(close, from); pos != std::string_view::npos; pos = prompt.find(close, pos + 1)) {
      std::size_t backslashes = 0;
      for (auto k = pos; k > from && prompt[k - 1] == '\\'; --k) ++backslashes;
      if (backslashes % 2 == 0) return pos;
    }
    throw Error(ErrorCode::ParseError, "unterminated refine prompt slot");
  };
  const auto a = find_close(q_begin, kAnswerOpen);
  const auto a_begin = a + kAnswerOpen.size();
  const auto c = find_close(a_begin, kContextOpen);
  const auto c_begin = c + kContextOpen.size();
  const auto c_end = prompt.rfind(kContextClose);
  if (c_end == std::string_view::npos || c_end < c_begin) throw Error(ErrorCode::ParseError, "unterminated context");
  return {text::unescape_quoted(prompt.substr(q_begin, a - q_begin)),
          text::unescape_quoted(prompt.substr(a_begin, c - a_begin)),
          text::unescape_fenced(prompt.substr(c_begin, c_end - c_begin))};
}

namespace {

std::string strip_quotes(std::string_view s) {
  static constexpr std::pair<std::string_view, std::string_view> kPairs[] = {
      {"\"", "\""}, {"'", "'"}, {"\xE2\x80\x9C", "\xE2\x80\x9D"}, {"\xE2\x80\x98", "\xE2\x80\x99"}};
  std::string_view out = text::trim(s);
  for (bool stripped = true; stripped;) {
    stripped = false;
    for (const auto& [open, close] : kPairs) {
      if (out.size() >= open.size() + close.size() && out.starts_with(open) && out.ends_with(close)) {
        out = text::trim(out.substr(open.size(), out.size() - open.size() - close.size()));
        stripped = true;
      }
    }
  }
  return std::string(out);
}

}  // namespace

RefineOutcome refine(std::string_view question, std::string_view initial_answer, const VerificationContext& context,
                     const std::vector<AtomicQuery>& queries, const TextModel& llm) {
  RefineOutcome out;
  if (!should_refine(queries) || context.empty()) {
    out.text = std::string(initial_answer);
    return out;
  }
  out.llm_called = true;
  std::string refined = strip_quotes(llm(build_refine_prompt(question, initial_answer, context)));
  if (refined.empty()) {
    out.text = std::string(initial_answer);
    out.empty_refinement = true;
    return out;
  }
  out.text = std::move(refined);
  return out;
}

}  // namespace atomcal
