#include "atomcal/text.hpp"

#include <cctype>



namespace atomcal::text {

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '\''; }

}  // namespace

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto nl = s.find('\n', start);
    if (nl == std::string_view::npos) nl = s.size();
    std::string_view line = s.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = nl + 1;
  }
  return lines;
}

bool starts_with_icase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  }
  return true;
}

std::string ascii_quotes(std::string_view s) {
  std::string out = replace_all(std::string(s), "\xE2\x80\x99", "'");  // ’
  out = replace_all(std::move(out), "\xE2\x80\x98", "'");              // ‘
  out = replace_all(std::move(out), "\xE2\x80\x9C", "\"");             // “
  out = replace_all(std::move(out), "\xE2\x80\x9D", "\"");             // ”
  return out;
}

std::vector<std::string> word_tokens_cased(std::string_view s) {
  const std::string folded = ascii_quotes(s);
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : folded) {
    if (is_word_char(static_cast<unsigned char>(ch))) {
      cur.push_back(ch);
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  // Quote characters used as quotation marks, not contractions.
  for (auto& t : tokens) {
    while (!t.empty() && t.front() == '\'') t.erase(t.begin());
    while (!t.empty() && t.back() == '\'') t.pop_back();
  }
  std::erase_if(tokens, [](const std::string& t) { return t.empty(); });
  return tokens;
}

std::vector<std::string> word_tokens(std::string_view s) {
  auto tokens = word_tokens_cased(s);
  for (auto& t : tokens) t = to_lower(t);
  return tokens;
}

std::string normalize_for_compare(std::string_view s) {
  std::string out;
  for (const auto& tok : word_tokens(s)) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

std::string escape_fenced(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\\' || c == '`') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::string unescape_fenced(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && (s[i + 1] == '\\' || s[i + 1] == '`')) ++i;
    out.push_back(s[i]);
  }
  return out;
}

std::string escape_quoted(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\\' || c == '"') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::string unescape_quoted(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && (s[i + 1] == '\\' || s[i + 1] == '"')) ++i;
    out.push_back(s[i]);
  }
  return out;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  if (from.empty()) return s;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

}  // namespace atomcal::text
