#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "atomcal/answer.hpp"

namespace atomcal {

/// Group keys understood by the scorers. All optional per prediction.
namespace keys {
inline constexpr std::string_view kFigureId = "figure_id";
inline constexpr std::string_view kPairId = "pair_id";
inline constexpr std::string_view kSubtask = "subtask";
inline constexpr std::string_view kImageId = "image_id";
inline constexpr std::string_view kDifficulty = "difficulty";
inline constexpr std::string_view kSplit = "split";
}  // namespace keys

using GroupKeys = std::map<std::string, std::string, std::less<>>;

/// A scored binary prediction. `predicted` may be Unparseable: it then counts
/// as wrong and as neither a Yes nor a No prediction.
struct LabeledPrediction {
  std::string example_id;
  Answer predicted = Answer::Unparseable;
  Answer gold = Answer::No;
  GroupKeys group_keys;
};

/// Yes is the positive class. Unparseable predictions are tallied apart,
/// split by gold label.
struct Confusion {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;
  long unparseable_yes = 0;
  long unparseable_no = 0;

  long total() const { return tp + fp + fn + tn + unparseable_yes + unparseable_no; }
  bool operator==(const Confusion&) const = default;
};

/// Throws Error(EmptyInput).
Confusion confusion(const std::vector<LabeledPrediction>& preds);

struct DiscriminativeScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Names of metrics whose denominator was zero (reported as 0).
  std::vector<std::string> degenerate;
};

/// recall counts unparseable gold-Yes items as misses.
DiscriminativeScores accuracy_f1(const std::vector<LabeledPrediction>& preds);

/// Per-subtask 100 * (accuracy + accuracy+), where accuracy+ is the fraction
/// of images with both questions right. Needs `subtask` and `image_id`.
/// Throws Error(MalformedGrouping) for images without exactly two questions.
std::map<std::string, double> mme_score(const std::vector<LabeledPrediction>& preds);

struct HallusionScores {
  double qacc = 0.0;
  double facc = 0.0;
  double aacc = 0.0;
  std::optional<double> easy_aacc;
  std::optional<double> hard_aacc;
};

/// Needs `pair_id` and `figure_id` on every prediction (Error(MissingGroupKey)).
HallusionScores hallusion_metrics(const std::vector<LabeledPrediction>& preds);

struct YesBias {
  double pct_diff = 0.0;
  /// Empty when there are no FP or FN errors.
  std::optional<double> fp_ratio;
};

YesBias yes_bias(const std::vector<LabeledPrediction>& preds);

// ---------------------------------------------------------------------------
// Generative (object hallucination) metrics

struct GenerativePrediction {
  std::string example_id;
  std::set<std::string> mentioned_objects;
  std::set<std::string> annotated_objects;
  std::set<std::string> hallucination_targets;
};

/// All values in [0, 100].
struct AmberScores {
  double chair = 0.0;
  double cover = 0.0;
  double hal = 0.0;
  double cog = 0.0;
  /// Responses that mention no object; excluded from chair and cog.
  int skipped_empty = 0;
};

AmberScores amber_metrics(const std::vector<GenerativePrediction>& gens);

/// Surface form -> canonical object name; surface forms may span words.
class Lexicon {
public:
  Lexicon() = default;
  explicit Lexicon(const std::map<std::string, std::string>& surface_to_canonical);

  static Lexicon from_json(const nlohmann::json& j);
  static Lexicon from_file(const std::filesystem::path& path);

  std::size_t size() const { return entries_.size(); }
  const std::map<std::vector<std::string>, std::string>& entries() const { return entries_; }
  std::size_t max_words() const { return max_words_; }

private:
  std::map<std::vector<std::string>, std::string> entries_;  // tokenized surface -> canonical
  std::size_t max_words_ = 0;
};

/// Longest-match scan over the lowercased word sequence.
std::set<std::string> extract_objects(std::string_view response_text, const Lexicon& lexicon);

}  // namespace atomcal
