#include "atomcal/report.hpp"

#include <cstdio>
#include <map>
#include <sstream>
#include <unordered_map>

#include "atomcal/error.hpp"

namespace atomcal {

using nlohmann::json;

const std::set<std::string>& metric_families() {
  static const std::set<std::string> f{"pope", "mme", "hallusion", "amber", "bias"};
  return f;
}

std::vector<Aligned> align(const std::vector<RunArtifact>& artifacts, const std::vector<DatasetExample>& dataset) {
  if (artifacts.empty()) throw Error(ErrorCode::EmptyInput, "no artifacts to evaluate");
  std::unordered_map<std::string, const DatasetExample*> by_id;
  for (const auto& ex : dataset) by_id.emplace(ex.example_id, &ex);
  std::vector<Aligned> out;
  std::vector<std::string> orphan_artifacts;
  std::set<std::string> matched;
  for (const auto& a : artifacts) {
    auto it = by_id.find(a.example_id);
    if (it == by_id.end()) {
      orphan_artifacts.push_back(a.example_id);
      continue;
    }
    if (!matched.insert(a.example_id).second) {
      throw Error(ErrorCode::IdMismatch, "duplicate artifact for example '" + a.example_id + "'");
    }
    out.push_back({&a, it->second});
  }
  std::vector<std::string> orphan_examples;
  for (const auto& ex : dataset) {
    if (!matched.contains(ex.example_id)) orphan_examples.push_back(ex.example_id);
  }
  if (!orphan_artifacts.empty() || !orphan_examples.empty()) {
    auto list = [](const std::vector<std::string>& ids) {
      std::string s;
      for (std::size_t i = 0; i < ids.size() && i < 10; ++i) s += (i ? ", " : "") + ids[i];
      if (ids.size() > 10) s += ", ... (" + std::to_string(ids.size()) + " total)";
      return s;
    };
    std::string msg;
    if (!orphan_artifacts.empty()) msg += "artifacts without a dataset example: " + list(orphan_artifacts);
    if (!orphan_examples.empty()) {
      msg += std::string(msg.empty() ? "" : "; ") + "dataset examples without an artifact: " + list(orphan_examples);
    }
    throw Error(ErrorCode::IdMismatch, msg);
  }
  return out;
}

namespace {

std::string answer_text(const RunArtifact& a, AnswerSource source) {
  const auto& s = source == AnswerSource::Final ? a.final_answer : a.initial_answer;
  return s.value_or("");
}

json scores_json(const DiscriminativeScores& s) {
  return json{{"accuracy", s.accuracy}, {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
              {"degenerate", s.degenerate}};
}

json confusion_json(const Confusion& c) {
  return json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn},
              {"unparseable_yes", c.unparseable_yes}, {"unparseable_no", c.unparseable_no}};
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json pope_json(const std::vector<LabeledPrediction>& preds) {
  json j;
  j["overall"] = scores_json(accuracy_f1(preds));
  j["confusion"] = confusion_json(confusion(preds));
  std::map<std::string, std::vector<LabeledPrediction>> by_split;
  for (const auto& p : preds) {
    if (auto it = p.group_keys.find(keys::kSplit); it != p.group_keys.end()) by_split[it->second].push_back(p);
  }
  j["splits"] = json::object();
  for (const auto& [split, v] : by_split) j["splits"][split] = scores_json(accuracy_f1(v));
  return j;
}

json mme_json(const std::vector<LabeledPrediction>& preds) {
  const auto per = mme_score(preds);
  double total = 0.0;
  for (const auto& [k, v] : per) total += v;
  return json{{"subtasks", per}, {"total", total}};
}

json hallusion_json(const std::vector<LabeledPrediction>& preds) {
  const auto h = hallusion_metrics(preds);
  return json{{"qacc", h.qacc}, {"facc", h.facc}, {"aacc", h.aacc},
              {"easy_aacc", opt_json(h.easy_aacc)}, {"hard_aacc", opt_json(h.hard_aacc)}};
}

json bias_json(const std::vector<LabeledPrediction>& preds) {
  const auto b = yes_bias(preds);
  return json{{"pct_diff", b.pct_diff}, {"fp_ratio", opt_json(b.fp_ratio)}};
}

json amber_json(const std::vector<GenerativePrediction>& gens) {
  const auto a = amber_metrics(gens);
  return json{{"chair", a.chair}, {"cover", a.cover}, {"hal", a.hal}, {"cog", a.cog}, {"skipped_empty", a.skipped_empty}};
}

}  // namespace

std::vector<LabeledPrediction> binary_predictions(const std::vector<Aligned>& aligned, AnswerSource source) {
  std::vector<LabeledPrediction> out;
  for (const auto& [a, ex] : aligned) {
    if (!ex->gold) continue;
    out.push_back({ex->example_id, normalize_answer(answer_text(*a, source)), *ex->gold, ex->group_keys});
  }
  return out;
}

std::vector<GenerativePrediction> generative_predictions(const std::vector<Aligned>& aligned, AnswerSource source,
                                                         const Lexicon& lexicon) {
  std::vector<GenerativePrediction> out;
  for (const auto& [a, ex] : aligned) {
    if (!ex->gold_objects) continue;
    out.push_back({ex->example_id, extract_objects(answer_text(*a, source), lexicon), *ex->gold_objects,
                   ex->hallucination_targets});
  }
  return out;
}

json eval_report(const std::vector<RunArtifact>& artifacts, const std::vector<DatasetExample>& dataset,
                 const std::set<std::string>& families, const Lexicon* lexicon) {
  for (const auto& f : families) {
    if (!metric_families().contains(f)) throw Error(ErrorCode::ConfigError, "unknown metric family '" + f + "'");
  }
  if (families.contains("amber") && lexicon == nullptr) {
    throw Error(ErrorCode::ConfigError, "amber metrics need a lexicon");
  }
  const auto aligned = align(artifacts, dataset);
  json report;
  report["schema_version"] = kReportSchemaVersion;
  report["examples"] = aligned.size();
  long failed = 0;
  for (const auto& a : aligned) failed += a.artifact->failed() ? 1 : 0;
  report["failed_examples"] = failed;
  for (auto [name, source] : {std::pair{"final", AnswerSource::Final}, std::pair{"direct", AnswerSource::Direct}}) {
    json section = json::object();
    const auto preds = binary_predictions(aligned, source);
    for (const auto& f : families) {
      try {
        if (f == "amber") {
          section[f] = amber_json(generative_predictions(aligned, source, *lexicon));
        } else if (f == "pope") {
          section[f] = pope_json(preds);
        } else if (f == "mme") {
          section[f] = mme_json(preds);
        } else if (f == "hallusion") {
          section[f] = hallusion_json(preds);
        } else if (f == "bias") {
          section[f] = bias_json(preds);
        }
      } catch (const Error& e) {
        if (e.code() == ErrorCode::EmptyInput || e.code() == ErrorCode::EmptyAnnotation) {
          section[f] = json{{"error", e.what()}};
        } else {
          throw;
        }
      }
    }
    report[name] = std::move(section);
  }
  return report;
}

namespace {

void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (j.is_number() || j.is_null() || j.is_string()) {
    out[prefix] = j;
  }
}

std::string cell(const json& v) {
  if (v.is_null()) return "-";
  if (v.is_string()) return v.get<std::string>().substr(0, 12);
  char buf[32];
  if (v.is_number_integer()) {
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v.get<long long>()));
  } else {
    std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
  }
  return buf;
}

}  // namespace

std::string eval_table(const json& report) {
  std::map<std::string, json> fin, dir;
  flatten(report.value("final", json::object()), "", fin);
  flatten(report.value("direct", json::object()), "", dir);
  std::size_t width = 6;
  for (const auto& [k, v] : fin) width = std::max(width, k.size());
  std::ostringstream os;
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %12s  %12s\n", static_cast<int>(width), "metric", "final", "direct");
  os << line;
  for (const auto& [k, v] : fin) {
    const auto d = dir.find(k);
    std::snprintf(line, sizeof line, "%-*s  %12s  %12s\n", static_cast<int>(width), k.c_str(), cell(v).c_str(),
                  d == dir.end() ? "-" : cell(d->second).c_str());
    os << line;
  }
  return os.str();
}

std::vector<stats::VarianceObservation> variance_from_artifacts(const std::vector<Aligned>& aligned, long* skipped) {
  std::vector<stats::VarianceInput> inputs;
  long skip = 0;
  for (const auto& [a, ex] : aligned) {
    if (!ex->gold) continue;
    const VerificationRecord* rec = nullptr;
    if (!a->records.empty()) rec = &a->records.front();
    const bool usable = rec != nullptr && std::any_of(rec->samples.begin(), rec->samples.end(), [](const AnswerSample& s) {
                          return s.answer != Answer::Unparseable;
                        });
    if (!usable) {
      ++skip;
      continue;
    }
    std::optional<Answer> original;
    if (a->passthrough && a->initial_answer) {
      const Answer init = normalize_answer(*a->initial_answer);
      if (init != Answer::Unparseable) original = init;
    }
    inputs.push_back({ex->example_id, rec, ex->gold, original});
  }
  if (skipped) *skipped = skip;
  return stats::variance_observations(inputs);
}

json to_json(const stats::TestResult& r) {
  return json{{"method", stats::to_string(r.method)},
              {"statistic", r.statistic},
              {"degrees_of_freedom", opt_json(r.degrees_of_freedom)},
              {"p_value", r.p_value},
              {"exact", r.exact}};
}

json stats_report(const std::vector<RunArtifact>& artifacts, const std::vector<DatasetExample>& dataset) {
  const auto aligned = align(artifacts, dataset);
  long skipped = 0;
  const auto obs = variance_from_artifacts(aligned, &skipped);
  const auto rep = stats::variance_correctness_report(obs);
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["observations"] = obs.size();
  j["skipped"] = skipped;
  json var;
  var["mean_var_correct"] = rep.mean_var_correct;
  var["mean_var_incorrect"] = rep.mean_var_incorrect;
  var["n_correct"] = rep.n_correct;
  var["n_incorrect"] = rep.n_incorrect;
  var["welch"] = rep.welch ? to_json(*rep.welch) : json(nullptr);
  if (!rep.welch_error.empty()) var["welch_error"] = rep.welch_error;
  var["mwu"] = to_json(rep.mwu);
  var["pbc"] = rep.pbc ? to_json(*rep.pbc) : json(nullptr);
  if (!rep.pbc_error.empty()) var["pbc_error"] = rep.pbc_error;
  j["variance"] = std::move(var);
  json series{{"variance_correct", json::array()}, {"variance_incorrect", json::array()}};
  for (const auto& o : obs) series[o.correct ? "variance_correct" : "variance_incorrect"].push_back(o.variance);
  j["series"] = std::move(series);
  j["yes_bias"] = json{{"final", bias_json(binary_predictions(aligned, AnswerSource::Final))},
                       {"direct", bias_json(binary_predictions(aligned, AnswerSource::Direct))}};
  return j;
}

}  // namespace atomcal
