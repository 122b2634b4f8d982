#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "atomcal/error.hpp"

namespace atomcal {

// ---------------------------------------------------------------------------
// Fact taxonomy

enum class Category { Entity, Attribute, Relation, Other };

enum class Subcategory {
  Whole,
  Part,
  State,
  Color,
  Type,
  TextRendering,
  Material,
  Shape,
  Size,
  Count,
  Texture,
  Style,
  Temporal,
  Spatial,
  Action,
  Other,
};

struct TaxonomyCategory {
  Category category = Category::Entity;
  Subcategory subcategory = Subcategory::Whole;

  bool operator==(const TaxonomyCategory&) const = default;
};

std::string_view to_string(Category c) noexcept;
std::string_view to_string(Subcategory s) noexcept;

bool is_legal(TaxonomyCategory t) noexcept;

/// Parses "entity" / "text rendering" etc. Case-insensitive; returns nullopt
/// for names outside the taxonomy or illegal pairings.
std::optional<TaxonomyCategory> taxonomy_from_strings(std::string_view category, std::string_view subcategory);

/// Every legal (category, subcategory) pair, in taxonomy order.
const std::vector<TaxonomyCategory>& all_taxonomy_categories();

struct AtomicTuple {
  int id = 0;
  TaxonomyCategory category;
  std::string argument;

  bool operator==(const AtomicTuple&) const = default;
};

/// "k | category - subcategory (argument)"
std::string render_tuple(const AtomicTuple& tuple);

struct AtomicQuery {
  int id = 0;
  std::string text;
  std::optional<AtomicTuple> source_tuple;
  bool passthrough = false;

  bool operator==(const AtomicQuery&) const = default;
};

// ---------------------------------------------------------------------------
// Few-shot exemplars

struct TupleShot {
  std::string question;
  std::string answer;
  std::vector<std::string> tuples;  // output lines, or {"None."}
};

struct QuestionShot {
  std::string question;
  std::vector<std::string> tuples;
  std::vector<std::string> questions;
};

struct Exemplars {
  int version = 1;
  std::vector<TupleShot> tuple_shots;
  std::vector<QuestionShot> question_shots;

  /// The set shipped in data/exemplars.json, compiled in.
  static const Exemplars& defaults();
  static Exemplars from_json(const nlohmann::json& j);
  static Exemplars from_file(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------
// Validation

enum class Rule { Empty, MissingQuestionMark, Negation, NonBinaryHead, CrossReference };

std::string_view to_string(Rule r) noexcept;

struct Violation {
  Rule rule;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

/// Empty result means the question passes. Checks, in order: trailing "?",
/// standalone negation tokens, and an auxiliary/copula as the first word.
std::vector<Violation> validate_positive_binary(std::string_view question);

/// validate_positive_binary plus a check for references to other questions.
std::vector<Violation> validate_atomic_query(std::string_view question);

/// Drops a trailing answer-format instruction ("... ? Please answer yes or
/// no.") so the question itself can be classified. Returns the input trimmed
/// when there is no such instruction.
std::string_view strip_answer_instruction(std::string_view question);

/// True when the question is a single positive binary clause and can be used
/// directly as the only atomic query.
bool classify_passthrough(std::string_view user_question);

// ---------------------------------------------------------------------------
// Prompts and output parsing

std::string build_tuple_prompt(std::string_view user_question, std::string_view initial_answer,
                               const std::vector<TupleShot>& few_shots);

/// Throws Error(EmptyTupleList) when `tuples` is empty.
std::string build_question_prompt(const std::vector<AtomicTuple>& tuples, std::string_view user_question,
                                  const std::vector<QuestionShot>& few_shots);

struct LineDiagnostic {
  int line_number = 0;
  std::string line;
  ErrorCode code = ErrorCode::MalformedLine;
  std::string detail;

  bool operator==(const LineDiagnostic&) const = default;
};

struct TupleParse {
  std::vector<AtomicTuple> tuples;
  std::vector<LineDiagnostic> diagnostics;
  int dropped_trivial = 0;
};

/// Skips bad lines and records why.
TupleParse parse_tuples_lenient(std::string_view llm_output);

/// Throws on the first bad line (MalformedLine, UnknownCategory, or
/// ValidationFailure for a negated argument).
std::vector<AtomicTuple> parse_tuples(std::string_view llm_output);

struct RejectedQuestion {
  int id = 0;
  std::string text;
  std::vector<Violation> violations;

  bool operator==(const RejectedQuestion&) const = default;
};

struct QuestionParse {
  std::vector<AtomicQuery> accepted;
  std::vector<RejectedQuestion> rejected;
  std::vector<LineDiagnostic> diagnostics;
};

QuestionParse parse_questions_lenient(std::string_view llm_output);

/// Throws MalformedLine, or ValidationFailure naming the first failing rule.
std::vector<AtomicQuery> parse_questions(std::string_view llm_output);

/// Question prompt followed by the rejected questions and their violations,
/// asking for rewrites in the same output format.
std::string build_repair_prompt(std::string_view question_prompt, const std::vector<RejectedQuestion>& rejected);

}  // namespace atomcal
