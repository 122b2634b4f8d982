#include "atomcal/answer.hpp"

#include <string>

#include "atomcal/text.hpp"

namespace atomcal {

std::optional<Answer> answer_from_string(std::string_view s) {
  const std::string v = text::to_lower(text::trim(s));
  if (v == "yes" || v == "1" || v == "true") return Answer::Yes;
  if (v == "no" || v == "0" || v == "false") return Answer::No;
  if (v == "unparseable") return Answer::Unparseable;
  return std::nullopt;
}

namespace {

bool yes_like(std::string_view t) { return t == "yes" || t == "yeah" || t == "yep"; }
bool no_like(std::string_view t) { return t == "no" || t == "nope"; }

bool has_alpha(std::string_view t) {
  for (char c : t) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return true;
  }
  return false;
}

}  // namespace

Answer normalize_answer(std::string_view raw) {
  const auto tokens = text::word_tokens(raw);
  for (const auto& t : tokens) {
    if (!has_alpha(t)) continue;
    if (yes_like(t)) return Answer::Yes;
    if (no_like(t)) return Answer::No;
    break;
  }

  // First sentence: up to the first terminator or line break.
  std::string_view s = raw;
  const auto end = s.find_first_of(".!?\n");
  if (end != std::string_view::npos) s = s.substr(0, end);
  bool saw_yes = false;
  bool saw_no = false;
  for (const auto& t : text::word_tokens(s)) {
    saw_yes = saw_yes || t == "yes";
    saw_no = saw_no || t == "no";
  }
  if (saw_yes != saw_no) return saw_yes ? Answer::Yes : Answer::No;
  return Answer::Unparseable;
}

}  // namespace atomcal
