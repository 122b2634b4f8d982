#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "atomcal/artifact.hpp"
#include "atomcal/dataset.hpp"
#include "atomcal/metrics.hpp"
#include "atomcal/stats.hpp"

namespace atomcal {

inline constexpr int kReportSchemaVersion = 1;

/// Metric families accepted by eval_report.
const std::set<std::string>& metric_families();

/// Which answer of an artifact to score.
enum class AnswerSource { Final, Direct };

/// Pairs artifacts with dataset examples by example_id. Throws
/// Error(EmptyInput) for no artifacts and Error(IdMismatch) naming orphans on
/// either side.
struct Aligned {
  const RunArtifact* artifact;
  const DatasetExample* example;
};
std::vector<Aligned> align(const std::vector<RunArtifact>& artifacts, const std::vector<DatasetExample>& dataset);

/// Binary predictions for examples with a Yes/No gold label.
std::vector<LabeledPrediction> binary_predictions(const std::vector<Aligned>& aligned, AnswerSource source);

/// Predictions for examples with gold objects. Needs a lexicon.
std::vector<GenerativePrediction> generative_predictions(const std::vector<Aligned>& aligned, AnswerSource source,
                                                         const Lexicon& lexicon);

/// Scores the final and the direct (initial) answers for each requested
/// family. Throws Error(ConfigError) for "amber" without a lexicon.
nlohmann::json eval_report(const std::vector<RunArtifact>& artifacts, const std::vector<DatasetExample>& dataset,
                           const std::set<std::string>& families, const Lexicon* lexicon = nullptr);

/// Fixed-width text view of an eval report.
std::string eval_table(const nlohmann::json& report);

/// Variance observations from the first verification record of every gold
/// labeled example that has parseable samples.
std::vector<stats::VarianceObservation> variance_from_artifacts(const std::vector<Aligned>& aligned,
                                                                long* skipped = nullptr);

/// Variance/correctness analysis plus yes-bias for final and direct answers.
/// Throws Error(SingleClass) when every observation is correct, or none is.
nlohmann::json stats_report(const std::vector<RunArtifact>& artifacts, const std::vector<DatasetExample>& dataset);

nlohmann::json to_json(const stats::TestResult& r);

}  // namespace atomcal
