#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the prompt builders and parsers.
namespace atomcal::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
bool starts_with_icase(std::string_view s, std::string_view prefix);

/// Replaces typographic apostrophes and quotes with ASCII equivalents.
std::string ascii_quotes(std::string_view s);

/// Lowercased word tokens: runs of letters, digits and apostrophes.
/// Typographic apostrophes are folded first so "Isn’t" yields "isn't".
std::vector<std::string> word_tokens(std::string_view s);

/// Word tokens preserving case, same splitting rule as word_tokens.
std::vector<std::string> word_tokens_cased(std::string_view s);

/// Lowercase, drop punctuation, collapse whitespace. Used for duplicate
/// detection among generated questions.
std::string normalize_for_compare(std::string_view s);

/// Backslash-escapes backticks (and backslashes) so that text placed inside a
/// ``` fence can never close it.
std::string escape_fenced(std::string_view s);
std::string unescape_fenced(std::string_view s);

/// Backslash-escapes double quotes (and backslashes) for a "..." slot.
std::string escape_quoted(std::string_view s);
std::string unescape_quoted(std::string_view s);

/// Replaces every occurrence of `from` with `to`.
std::string replace_all(std::string s, std::string_view from, std::string_view to);

}  // namespace atomcal::text
