#include "atomcal/query_gen.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "atomcal/text.hpp"
#include "default_exemplars.hpp"

namespace atomcal {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Taxonomy

std::string_view to_string(Category c) noexcept {
  switch (c) {
    case Category::Entity: return "entity";
    case Category::Attribute: return "attribute";
    case Category::Relation: return "relation";
    case Category::Other: return "other";
  }
  return "other";
}

std::string_view to_string(Subcategory s) noexcept {
  switch (s) {
    case Subcategory::Whole: return "whole";
    case Subcategory::Part: return "part";
    case Subcategory::State: return "state";
    case Subcategory::Color: return "color";
    case Subcategory::Type: return "type";
    case Subcategory::TextRendering: return "text rendering";
    case Subcategory::Material: return "material";
    case Subcategory::Shape: return "shape";
    case Subcategory::Size: return "size";
    case Subcategory::Count: return "count";
    case Subcategory::Texture: return "texture";
    case Subcategory::Style: return "style";
    case Subcategory::Temporal: return "temporal";
    case Subcategory::Spatial: return "spatial";
    case Subcategory::Action: return "action";
    case Subcategory::Other: return "other";
  }
  return "other";
}

const std::vector<TaxonomyCategory>& all_taxonomy_categories() {
  static const std::vector<TaxonomyCategory> all = {
      {Category::Entity, Subcategory::Whole},           {Category::Entity, Subcategory::Part},
      {Category::Attribute, Subcategory::State},        {Category::Attribute, Subcategory::Color},
      {Category::Attribute, Subcategory::Type},         {Category::Attribute, Subcategory::TextRendering},
      {Category::Attribute, Subcategory::Material},     {Category::Attribute, Subcategory::Shape},
      {Category::Attribute, Subcategory::Size},         {Category::Attribute, Subcategory::Count},
      {Category::Attribute, Subcategory::Texture},      {Category::Attribute, Subcategory::Style},
      {Category::Attribute, Subcategory::Temporal},     {Category::Relation, Subcategory::Spatial},
      {Category::Relation, Subcategory::Action},        {Category::Other, Subcategory::Other},
  };
  return all;
}

bool is_legal(TaxonomyCategory t) noexcept {
  const auto& all = all_taxonomy_categories();
  return std::find(all.begin(), all.end(), t) != all.end();
}

std::optional<TaxonomyCategory> taxonomy_from_strings(std::string_view category, std::string_view subcategory) {
  // Collapse internal whitespace so "text  rendering" still matches.
  auto canon = [](std::string_view s) {
    std::string out;
    for (const auto& tok : text::word_tokens(s)) {
      if (!out.empty()) out.push_back(' ');
      out += tok;
    }
    return out;
  };
  const std::string c = canon(category);
  const std::string s = canon(subcategory);
  for (const auto& t : all_taxonomy_categories()) {
    if (to_string(t.category) == c && to_string(t.subcategory) == s) return t;
  }
  return std::nullopt;
}

std::string render_tuple(const AtomicTuple& t) {
  std::ostringstream os;
  os << t.id << " | " << to_string(t.category.category) << " - " << to_string(t.category.subcategory) << " ("
     << t.argument << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// Exemplars

Exemplars Exemplars::from_json(const json& j) {
  Exemplars ex;
  try {
    ex.version = j.value("version", 1);
    for (const auto& s : j.at("tuple_shots")) {
      ex.tuple_shots.push_back({s.at("question").get<std::string>(), s.at("answer").get<std::string>(),
                                s.at("tuples").get<std::vector<std::string>>()});
    }
    for (const auto& s : j.at("question_shots")) {
      ex.question_shots.push_back({s.at("question").get<std::string>(),
                                   s.at("tuples").get<std::vector<std::string>>(),
                                   s.at("questions").get<std::vector<std::string>>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("exemplar file: ") + e.what());
  }
  if (ex.tuple_shots.empty() || ex.question_shots.empty()) {
    throw Error(ErrorCode::SchemaError, "exemplar file needs at least one tuple shot and one question shot");
  }
  return ex;
}

Exemplars Exemplars::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read exemplar file " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

const Exemplars& Exemplars::defaults() {
  static const Exemplars ex = from_json(json::parse(detail::kDefaultExemplarsJson));
  return ex;
}

// ---------------------------------------------------------------------------
// Validation

std::string_view to_string(Rule r) noexcept {
  switch (r) {
    case Rule::Empty: return "empty";
    case Rule::MissingQuestionMark: return "missing_question_mark";
    case Rule::Negation: return "negation";
    case Rule::NonBinaryHead: return "non_binary_head";
    case Rule::CrossReference: return "cross_reference";
  }
  return "empty";
}

namespace {

const std::set<std::string, std::less<>> kNegations = {"no", "not", "n't", "none", "never", "nothing",
                                                       "neither", "nor", "without", "cannot"};

const std::set<std::string, std::less<>> kBinaryHeads = {"is",  "are",  "does", "do",  "can", "has",
                                                         "have", "was", "were", "did", "will"};

bool is_negation_token(std::string_view tok) {
  return kNegations.contains(tok) || tok.ends_with("n't");
}

}  // namespace

std::vector<Violation> validate_positive_binary(std::string_view question) {
  std::vector<Violation> out;
  const std::string_view q = text::trim(question);
  if (q.empty()) {
    out.push_back({Rule::Empty, "question is empty"});
    return out;
  }
  if (q.back() != '?') out.push_back({Rule::MissingQuestionMark, "question does not end with '?'"});
  const auto tokens = text::word_tokens(q);
  for (const auto& tok : tokens) {
    if (is_negation_token(tok)) {
      out.push_back({Rule::Negation, "negation token '" + tok + "'"});
      break;
    }
  }
  std::string head = tokens.empty() ? std::string() : tokens.front();
  // "isn't" is a yes/no head; the negation is reported above.
  if (head.ends_with("n't")) {
    head.erase(head.size() - 3);
    if (head == "ca") head = "can";
    if (head == "wo") head = "will";
  }
  if (!kBinaryHeads.contains(head)) {
    out.push_back({Rule::NonBinaryHead,
                   "first word '" + (tokens.empty() ? std::string() : tokens.front()) + "' is not a yes/no head"});
  }
  return out;
}

std::vector<Violation> validate_atomic_query(std::string_view question) {
  auto out = validate_positive_binary(question);
  static const std::array<std::string_view, 6> kRefs = {"previous question", "question above", "above question",
                                                        "last question",     "other question", "same question"};
  const std::string lower = text::normalize_for_compare(question);
  for (auto ref : kRefs) {
    if (lower.find(ref) != std::string::npos) {
      out.push_back({Rule::CrossReference, "refers to another question ('" + std::string(ref) + "')"});
      return out;
    }
  }
  static const std::regex kNumbered(R"(\bquestions?\s*(no\.?\s*|#\s*)?\d+)");
  if (std::regex_search(lower, kNumbered)) out.push_back({Rule::CrossReference, "refers to a numbered question"});
  return out;
}

std::string_view strip_answer_instruction(std::string_view question) {
  const std::string_view q = text::trim(question);
  const auto mark = q.rfind('?');
  if (mark == std::string_view::npos || mark + 1 == q.size()) return q;
  const std::string tail = text::to_lower(text::trim(q.substr(mark + 1)));
  if (tail.starts_with("please answer") || tail.starts_with("answer ") || tail.starts_with("please respond")) {
    return q.substr(0, mark + 1);
  }
  return q;
}

bool classify_passthrough(std::string_view user_question) {
  const std::string_view q = text::trim(user_question);
  if (!validate_positive_binary(q).empty()) return false;
  // A second sentence or question before the final '?' means more than one clause.
  const std::string_view body = q.substr(0, q.size() - 1);
  if (body.find_first_of("?.;!") != std::string_view::npos) return false;
  const auto tokens = text::word_tokens(body);
  for (std::size_t i = 1; i + 1 < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if ((t == "and" || t == "or" || t == "but") && kBinaryHeads.contains(tokens[i + 1])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Prompts

namespace {

constexpr std::string_view kTupleTask =
    R"PROMPT(Task: Based on the example input questions, the example output tuples, and the provided tuple taxonomy below, generate skill-specific tuples to help verify and refine the answer of the last input question.

Requirements:
1. Ensure the generated tuples fully capture the factual information of the input question, with each tuple representing a distinct atomic and positive statement. Subjective elements in the initial answer should be disregarded.
2. If the input question is irrelevant to any category, output "None."
3. You must remove any negative words including "not" and "no" from your generation regardless of whether it will result in the opposite meaning.
4. Do not generate trivial tuples about the image itself such as "entity - whole (image)".
5. Each tuple should be output in the following format: id | tuple

Tuple taxonomy:
```
Entity relationships:
* entity - whole
* entity - part

Attribute relationships:
* attribute - state
* attribute - color
* attribute - type
* attribute - text rendering
* attribute - material
* attribute - shape
* attribute - size
* attribute - count
* attribute - texture
* attribute - style
* attribute - temporal

Relations:
* relation - spatial
* relation - action

Miscellaneous:
* other - other
```)PROMPT";

constexpr std::string_view kQuestionTask =
    R"PROMPT(Task: Given the example input questions, skill-specific tuples, and the example output of generated binary questions, re-write each tuple from the last example into a standalone, positively framed natural language binary question.

Requirements:
1. Each binary question should be non-trivial for a vision model to verify. Exclude trivial tuples that do not help in verifying and refining the initial answer.
2. Each binary question should be self-contained and answerable independently, without requiring knowledge of other binary questions.
2. Generate one binary question only for the two or more tuples sharing the same meaning or the opposite meaning.
3. Ensure the generated questions fully capture the factual information of the input question. Create additional binary questions if they are helpful and complementary for refining the initial answer.
4. Treat conditional statements or given information in "Question:" as context that you don't need to ask questions from.
5. You must generate positively framed questions and remove any negative words including "not" and "no" from your generation regardless of whether it will result in the opposite meaning. For example, instead of generating "is this artwork not created by Jacob?", you should always ask its corresponding positive question "is this artwork created by Jacob?"
output format: id | question)PROMPT";

// Newlines inside a slot would let user text fake a "Tuples:" header.
std::string one_line(std::string_view s) {
  std::string out(text::trim(s));
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::replace(out.begin(), out.end(), '\r', ' ');
  return out;
}

}  // namespace

std::string build_tuple_prompt(std::string_view user_question, std::string_view initial_answer,
                               const std::vector<TupleShot>& few_shots) {
  std::string p(kTupleTask);
  p += "\n\nExamples:\n";
  for (const auto& shot : few_shots) {
    p += "\nQuestion: " + one_line(shot.question) + "\n";
    p += "Answer: " + one_line(shot.answer) + "\n";
    p += "Tuples:\n";
    for (const auto& line : shot.tuples) p += line + "\n";
  }
  p += "\nQuestion: " + one_line(user_question) + "\n";
  p += "Answer: " + one_line(initial_answer) + "\n";
  p += "Tuples:\n";
  return p;
}

std::string build_question_prompt(const std::vector<AtomicTuple>& tuples, std::string_view user_question,
                                  const std::vector<QuestionShot>& few_shots) {
  if (tuples.empty()) throw Error(ErrorCode::EmptyTupleList, "cannot build a question prompt without tuples");
  std::string p(kQuestionTask);
  p += "\n\nExamples:\n";
  for (const auto& shot : few_shots) {
    p += "\nQuestion: " + one_line(shot.question) + "\n";
    p += "Tuples:\n";
    for (const auto& line : shot.tuples) p += line + "\n";
    p += "Binary questions:\n";
    for (const auto& line : shot.questions) p += line + "\n";
  }
  p += "\nQuestion: " + one_line(user_question) + "\n";
  p += "Tuples:\n";
  for (const auto& t : tuples) p += render_tuple(t) + "\n";
  p += "Binary questions:\n";
  return p;
}

std::string build_repair_prompt(std::string_view question_prompt, const std::vector<RejectedQuestion>& rejected) {
  std::string p(question_prompt);
  p += "\nThe following binary questions violate the requirements above:\n";
  for (const auto& r : rejected) {
    p += std::to_string(r.id) + " | " + one_line(r.text) + " (";
    for (std::size_t i = 0; i < r.violations.size(); ++i) {
      if (i) p += ", ";
      p += std::string(to_string(r.violations[i].rule));
    }
    p += ")\n";
  }
  p += "Rewrite only these questions so that each is a positively framed yes/no question ending with \"?\", "
       "keeping the same ids.\noutput format: id | question\n";
  return p;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

bool is_none_line(std::string_view line) {
  std::string l = text::to_lower(text::trim(line));
  while (!l.empty() && (l.back() == '.' || l.back() == '"')) l.pop_back();
  while (!l.empty() && l.front() == '"') l.erase(l.begin());
  return l == "none";
}

bool is_fence(std::string_view line) { return text::trim(line).starts_with("```"); }

bool is_trivial_image_argument(std::string_view argument) {
  std::string a = text::normalize_for_compare(argument);
  for (std::string_view det : {"the ", "this ", "an ", "a "}) {
    if (a.starts_with(det)) {
      a.erase(0, det.size());
      break;
    }
  }
  static const std::set<std::string, std::less<>> kImageWords = {"image", "picture", "photo", "photograph",
                                                                  "scene", "frame"};
  return kImageWords.contains(a);
}

std::optional<std::string> negation_in(std::string_view s) {
  for (const auto& tok : text::word_tokens(s)) {
    if (tok == "no" || tok == "not" || tok.ends_with("n't")) return tok;
  }
  return std::nullopt;
}

}  // namespace

TupleParse parse_tuples_lenient(std::string_view llm_output) {
  static const std::regex kLine(R"(^\s*(\d{1,9})\s*\|\s*([A-Za-z]+)\s*-\s*([A-Za-z][A-Za-z ]*?)\s*\((.*)\)\s*\.?\s*$)");
  TupleParse out;
  const auto lines = text::split_lines(llm_output);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const int lineno = static_cast<int>(i) + 1;
    if (text::trim(line).empty() || is_fence(line) || is_none_line(line)) continue;
    std::smatch m;
    if (!std::regex_match(line, m, kLine)) {
      out.diagnostics.push_back({lineno, line, ErrorCode::MalformedLine, "expected 'id | category - subcategory (argument)'"});
      continue;
    }
    const auto cat = taxonomy_from_strings(m[2].str(), m[3].str());
    if (!cat) {
      out.diagnostics.push_back({lineno, line, ErrorCode::UnknownCategory,
                                 "'" + m[2].str() + " - " + m[3].str() + "' is not in the taxonomy"});
      continue;
    }
    const std::string argument(text::trim(m[4].str()));
    if (argument.empty()) {
      out.diagnostics.push_back({lineno, line, ErrorCode::MalformedLine, "empty tuple argument"});
      continue;
    }
    if (is_trivial_image_argument(argument)) {
      ++out.dropped_trivial;
      continue;
    }
    if (auto neg = negation_in(argument)) {
      out.diagnostics.push_back({lineno, line, ErrorCode::ValidationFailure, "negation token '" + *neg + "' in argument"});
      continue;
    }
    out.tuples.push_back(AtomicTuple{std::stoi(m[1].str()), *cat, argument});
  }
  return out;
}

std::vector<AtomicTuple> parse_tuples(std::string_view llm_output) {
  auto parsed = parse_tuples_lenient(llm_output);
  if (!parsed.diagnostics.empty()) {
    const auto& d = parsed.diagnostics.front();
    throw Error(d.code, "line " + std::to_string(d.line_number) + ": " + d.detail + ": " + d.line);
  }
  return std::move(parsed.tuples);
}

QuestionParse parse_questions_lenient(std::string_view llm_output) {
  static const std::regex kLine(R"(^\s*(\d{1,9})\s*\|\s*(.*\S)\s*$)");
  QuestionParse out;
  const auto lines = text::split_lines(llm_output);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const int lineno = static_cast<int>(i) + 1;
    if (text::trim(line).empty() || is_fence(line)) continue;
    std::smatch m;
    if (!std::regex_match(line, m, kLine)) {
      out.diagnostics.push_back({lineno, line, ErrorCode::MalformedLine, "expected 'id | question'"});
      continue;
    }
    const int id = std::stoi(m[1].str());
    std::string q = text::ascii_quotes(m[2].str());
    auto violations = validate_atomic_query(q);
    if (!violations.empty()) {
      out.rejected.push_back({id, std::move(q), std::move(violations)});
      continue;
    }
    out.accepted.push_back(AtomicQuery{id, std::move(q), std::nullopt, false});
  }
  return out;
}

std::vector<AtomicQuery> parse_questions(std::string_view llm_output) {
  auto parsed = parse_questions_lenient(llm_output);
  if (!parsed.diagnostics.empty()) {
    const auto& d = parsed.diagnostics.front();
    throw Error(d.code, "line " + std::to_string(d.line_number) + ": " + d.detail + ": " + d.line);
  }
  if (!parsed.rejected.empty()) {
    const auto& r = parsed.rejected.front();
    throw Error(ErrorCode::ValidationFailure,
                std::string(to_string(r.violations.front().rule)) + ": " + r.violations.front().detail + ": " + r.text);
  }
  return std::move(parsed.accepted);
}

}  // namespace atomcal
