#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "atomcal/answer.hpp"
#include "atomcal/metrics.hpp"

namespace atomcal {

enum class DatasetFormat { Auto, Unified, Pope, Mme, Hallusion, Amber };

std::string_view to_string(DatasetFormat f) noexcept;
std::optional<DatasetFormat> dataset_format_from_string(std::string_view s);

/// One benchmark item. At most one of `gold` and `gold_objects` is set;
/// neither means an open generative question.
struct DatasetExample {
  std::string example_id;
  std::string image;      // file name as given by the benchmark, may be empty
  std::string image_ref;  // content digest, or digest of the name if the file is absent
  std::string question;
  std::optional<Answer> gold;
  std::optional<std::set<std::string>> gold_objects;
  std::set<std::string> hallucination_targets;
  GroupKeys group_keys;
  std::optional<std::string> initial_answer;  // precomputed, optional

  bool operator==(const DatasetExample&) const = default;
};

struct LoadOptions {
  /// Directory the benchmark's image names are relative to. When an image
  /// exists there, image_ref is the SHA-256 of its bytes.
  std::optional<std::filesystem::path> image_root;
};

/// Reads JSONL or a JSON array (MME also accepts tab-separated
/// "image<TAB>question<TAB>answer" lines). Throws Error(ParseError) with the
/// line number, Error(SchemaError) naming a missing field, or Error(IoError).
std::vector<DatasetExample> load_dataset(const std::filesystem::path& path, DatasetFormat format,
                                         const LoadOptions& options = {});

/// Guess from the file extension and the first record's fields.
DatasetFormat detect_format(const std::filesystem::path& path);

nlohmann::json to_json(const DatasetExample& example);
DatasetExample example_from_json(const nlohmann::json& j);

/// Writes the unified JSONL interchange format.
void write_unified(const std::filesystem::path& path, const std::vector<DatasetExample>& examples);

/// image_ref for a name with no file behind it.
std::string name_digest(std::string_view image_name);

}  // namespace atomcal
