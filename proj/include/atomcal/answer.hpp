#pragma once

#include <optional>
#include <string_view>

namespace atomcal {

/// Normalized binary answer. Unparseable marks a response with no usable
/// yes/no decision; it is never a valid gold label.
enum class Answer { Yes, No, Unparseable };

constexpr std::string_view to_string(Answer a) noexcept {
  switch (a) {
    case Answer::Yes: return "Yes";
    case Answer::No: return "No";
    case Answer::Unparseable: return "Unparseable";
  }
  return "Unparseable";
}

/// Accepts "Yes"/"No"/"Unparseable" case-insensitively, plus "1"/"0" and
/// "true"/"false" since benchmark files use all of them for gold labels.
std::optional<Answer> answer_from_string(std::string_view s);

/// Maps a free-text model answer to Yes/No. The first alphabetic token
/// decides when it is yes-like or no-like; otherwise the first sentence must
/// contain exactly one of the standalone words "yes"/"no".
Answer normalize_answer(std::string_view raw);

constexpr Answer opposite(Answer a) noexcept {
  return a == Answer::Yes ? Answer::No : a == Answer::No ? Answer::Yes : Answer::Unparseable;
}

}  // namespace atomcal
