#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "atomcal/record.hpp"
#include "atomcal/refinement.hpp"

namespace atomcal {

inline constexpr int kArtifactSchemaVersion = 1;

/// Everything one pipeline run produced for one example. Stages that did not
/// run leave their fields empty and add a flag saying why.
struct RunArtifact {
  int schema_version = kArtifactSchemaVersion;
  std::string example_id;
  std::string question;
  std::string image_ref;
  std::optional<std::string> initial_answer;
  bool passthrough = false;
  std::vector<AtomicTuple> tuples;
  std::vector<AtomicQuery> queries;
  std::vector<VerificationRecord> records;
  VerificationContext context;
  std::optional<std::string> final_answer;
  std::vector<std::string> flags;
  std::optional<std::string> error;
  /// Sum of backend-reported latencies, so replayed runs reproduce it.
  std::int64_t latency_ms = 0;
  int gateway_calls = 0;

  bool failed() const { return !final_answer.has_value(); }
  bool has_flag(std::string_view prefix) const;

  bool operator==(const RunArtifact&) const = default;
};

nlohmann::json to_json(const RunArtifact& artifact);
/// Throws Error(SchemaError).
RunArtifact artifact_from_json(const nlohmann::json& j);

/// One compact line, no trailing newline.
std::string serialize_artifact(const RunArtifact& artifact);

struct ArtifactFile {
  std::vector<RunArtifact> artifacts;
  /// Byte length of the well-formed prefix.
  std::size_t valid_bytes = 0;
  /// True when the file ends in a partial line that was ignored.
  bool torn_tail = false;
};

/// Reads a JSONL artifact file. A malformed final line without a newline is
/// treated as a torn write and skipped; any other malformed line throws
/// Error(ParseError) with its line number.
ArtifactFile read_artifacts(const std::filesystem::path& path);

}  // namespace atomcal
