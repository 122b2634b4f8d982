#include "atomcal/metrics.hpp"

#include <algorithm>
#include <fstream>

#include "atomcal/error.hpp"
#include "atomcal/text.hpp"

namespace atomcal {

Confusion confusion(const std::vector<LabeledPrediction>& preds) {
  if (preds.empty()) throw Error(ErrorCode::EmptyInput, "no predictions to score");
  Confusion c;
  for (const auto& p : preds) {
    if (p.gold != Answer::Yes && p.gold != Answer::No) {
      throw Error(ErrorCode::SchemaError, "gold label for " + p.example_id + " is not Yes/No");
    }
    const bool gold_yes = p.gold == Answer::Yes;
    switch (p.predicted) {
      case Answer::Yes: (gold_yes ? c.tp : c.fp)++; break;
      case Answer::No: (gold_yes ? c.fn : c.tn)++; break;
      case Answer::Unparseable: (gold_yes ? c.unparseable_yes : c.unparseable_no)++; break;
    }
  }
  return c;
}

namespace {

double ratio(long num, long den, std::string_view name, std::vector<std::string>& degenerate) {
  if (den == 0) {
    degenerate.emplace_back(name);
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

bool correct(const LabeledPrediction& p) { return p.predicted == p.gold; }

const std::string& require_key(const LabeledPrediction& p, std::string_view key) {
  const auto it = p.group_keys.find(key);
  if (it == p.group_keys.end() || it->second.empty()) {
    throw Error(ErrorCode::MissingGroupKey, p.example_id + " lacks group key '" + std::string(key) + "'");
  }
  return it->second;
}

// Fraction of groups whose members are all correct.
double all_correct_fraction(const std::vector<LabeledPrediction>& preds, std::string_view key) {
  std::map<std::string, bool> groups;
  for (const auto& p : preds) {
    auto [it, inserted] = groups.try_emplace(require_key(p, key), true);
    it->second = it->second && correct(p);
  }
  const auto good = std::count_if(groups.begin(), groups.end(), [](const auto& g) { return g.second; });
  return static_cast<double>(good) / static_cast<double>(groups.size());
}

double per_question_accuracy(const std::vector<const LabeledPrediction*>& preds) {
  const auto good = std::count_if(preds.begin(), preds.end(), [](const auto* p) { return correct(*p); });
  return static_cast<double>(good) / static_cast<double>(preds.size());
}

}  // namespace

DiscriminativeScores accuracy_f1(const std::vector<LabeledPrediction>& preds) {
  const Confusion c = confusion(preds);
  DiscriminativeScores s;
  s.accuracy = ratio(c.tp + c.tn, c.total(), "accuracy", s.degenerate);
  s.precision = ratio(c.tp, c.tp + c.fp, "precision", s.degenerate);
  s.recall = ratio(c.tp, c.tp + c.fn + c.unparseable_yes, "recall", s.degenerate);
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  } else {
    s.f1 = 0.0;
    s.degenerate.emplace_back("f1");
  }
  return s;
}

std::map<std::string, double> mme_score(const std::vector<LabeledPrediction>& preds) {
  if (preds.empty()) throw Error(ErrorCode::EmptyInput, "no predictions to score");
  // subtask -> image -> predictions
  std::map<std::string, std::map<std::string, std::vector<const LabeledPrediction*>>> grouped;
  for (const auto& p : preds) grouped[require_key(p, keys::kSubtask)][require_key(p, keys::kImageId)].push_back(&p);

  std::map<std::string, double> scores;
  for (const auto& [subtask, images] : grouped) {
    long questions = 0;
    long right = 0;
    long images_both = 0;
    for (const auto& [image, ps] : images) {
      if (ps.size() != 2) {
        throw Error(ErrorCode::MalformedGrouping, "MME image '" + image + "' in subtask '" + subtask + "' has " +
                                                      std::to_string(ps.size()) + " questions, expected 2");
      }
      const auto ok = std::count_if(ps.begin(), ps.end(), [](const auto* p) { return correct(*p); });
      questions += 2;
      right += ok;
      if (ok == 2) ++images_both;
    }
    const double acc = static_cast<double>(right) / static_cast<double>(questions);
    const double acc_plus = static_cast<double>(images_both) / static_cast<double>(images.size());
    scores[subtask] = 100.0 * (acc + acc_plus);
  }
  return scores;
}

HallusionScores hallusion_metrics(const std::vector<LabeledPrediction>& preds) {
  if (preds.empty()) throw Error(ErrorCode::EmptyInput, "no predictions to score");
  HallusionScores s;
  s.qacc = all_correct_fraction(preds, keys::kPairId);
  s.facc = all_correct_fraction(preds, keys::kFigureId);
  std::vector<const LabeledPrediction*> all, easy, hard;
  for (const auto& p : preds) {
    all.push_back(&p);
    const auto it = p.group_keys.find(keys::kDifficulty);
    if (it == p.group_keys.end()) continue;
    if (it->second == "easy") easy.push_back(&p);
    else if (it->second == "hard") hard.push_back(&p);
  }
  s.aacc = per_question_accuracy(all);
  if (!easy.empty()) s.easy_aacc = per_question_accuracy(easy);
  if (!hard.empty()) s.hard_aacc = per_question_accuracy(hard);
  return s;
}

YesBias yes_bias(const std::vector<LabeledPrediction>& preds) {
  const Confusion c = confusion(preds);
  YesBias b;
  const long predicted_yes = c.tp + c.fp;
  const long gold_yes = c.tp + c.fn + c.unparseable_yes;
  b.pct_diff = static_cast<double>(predicted_yes - gold_yes) / static_cast<double>(c.total());
  if (c.fp + c.fn > 0) b.fp_ratio = static_cast<double>(c.fp) / static_cast<double>(c.fp + c.fn);
  return b;
}

AmberScores amber_metrics(const std::vector<GenerativePrediction>& gens) {
  if (gens.empty()) throw Error(ErrorCode::EmptyInput, "no generative predictions to score");
  AmberScores s;
  double chair_sum = 0.0;
  double cog_sum = 0.0;
  double cover_sum = 0.0;
  int hallucinating = 0;
  for (const auto& g : gens) {
    if (g.annotated_objects.empty()) throw Error(ErrorCode::EmptyAnnotation, g.example_id + " has no annotated objects");
    std::vector<std::string> hallucinated;
    std::set_difference(g.mentioned_objects.begin(), g.mentioned_objects.end(), g.annotated_objects.begin(),
                        g.annotated_objects.end(), std::back_inserter(hallucinated));
    std::vector<std::string> covered;
    std::set_intersection(g.mentioned_objects.begin(), g.mentioned_objects.end(), g.annotated_objects.begin(),
                          g.annotated_objects.end(), std::back_inserter(covered));
    const auto cognitive = std::count_if(hallucinated.begin(), hallucinated.end(),
                                         [&](const std::string& o) { return g.hallucination_targets.contains(o); });
    cover_sum += static_cast<double>(covered.size()) / static_cast<double>(g.annotated_objects.size());
    if (!hallucinated.empty()) ++hallucinating;
    if (g.mentioned_objects.empty()) {
      ++s.skipped_empty;
      continue;
    }
    const auto m = static_cast<double>(g.mentioned_objects.size());
    chair_sum += static_cast<double>(hallucinated.size()) / m;
    cog_sum += static_cast<double>(cognitive) / m;
  }
  const auto n = static_cast<double>(gens.size());
  const auto n_mentioning = static_cast<double>(gens.size() - static_cast<std::size_t>(s.skipped_empty));
  s.chair = n_mentioning > 0 ? 100.0 * chair_sum / n_mentioning : 0.0;
  s.cog = n_mentioning > 0 ? 100.0 * cog_sum / n_mentioning : 0.0;
  s.cover = 100.0 * cover_sum / n;
  s.hal = 100.0 * hallucinating / n;
  return s;
}

// ---------------------------------------------------------------------------

Lexicon::Lexicon(const std::map<std::string, std::string>& surface_to_canonical) {
  for (const auto& [surface, canonical] : surface_to_canonical) {
    auto words = text::word_tokens(surface);
    if (words.empty()) continue;
    max_words_ = std::max(max_words_, words.size());
    entries_.insert_or_assign(std::move(words), text::to_lower(text::trim(canonical)));
  }
}

Lexicon Lexicon::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "lexicon must be a JSON object of surface -> canonical");
  std::map<std::string, std::string> m;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw Error(ErrorCode::SchemaError, "lexicon value for '" + k + "' is not a string");
    m[k] = v.get<std::string>();
  }
  return Lexicon(m);
}

Lexicon Lexicon::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read lexicon " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

std::set<std::string> extract_objects(std::string_view response_text, const Lexicon& lexicon) {
  std::set<std::string> found;
  const auto words = text::word_tokens(response_text);
  std::size_t i = 0;
  while (i < words.size()) {
    std::size_t matched = 0;
    for (std::size_t len = std::min(lexicon.max_words(), words.size() - i); len >= 1; --len) {
      const std::vector<std::string> span(words.begin() + static_cast<long>(i), words.begin() + static_cast<long>(i + len));
      const auto it = lexicon.entries().find(span);
      if (it != lexicon.entries().end()) {
        found.insert(it->second);
        matched = len;
        break;
      }
    }
    i += matched > 0 ? matched : 1;
  }
  return found;
}

}  // namespace atomcal
