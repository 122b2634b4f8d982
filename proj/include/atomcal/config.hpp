#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "atomcal/confidence.hpp"
#include "atomcal/gateway.hpp"
#include "atomcal/http_backend.hpp"
#include "atomcal/query_gen.hpp"

namespace atomcal {

inline constexpr int kConfigSchemaVersion = 1;

struct PipelineConfig {
  std::string mllm_backend = "mllm";
  std::string llm_backend = "llm";
  std::string mllm_model = "mllm";
  std::string llm_model = "llm";
  int n_paraphrases = 10;
  bool include_original = false;
  Estimator estimator = Estimator::SelfConsistency;
  Aggregator aggregator = Aggregator::Mean;
  double context_threshold = 0.0;
  double mllm_temperature = 0.6;
  double llm_temperature = 0.0;
  int mllm_max_tokens = 1024;    // initial answer
  int answer_max_tokens = 16;    // answers to paraphrased atomic questions
  int llm_max_tokens = 1000;
  std::optional<std::int64_t> seed;
  int parallelism = 1;
  CacheMode cache_mode = CacheMode::Off;
  /// Prompt sent to the MLLM for each paraphrase; "{question}" is replaced.
  std::string answer_template = "{question}";
  bool use_precomputed_initial = false;

  /// Throws Error(ConfigError) on out-of-range values.
  void validate() const;
};

struct BackendSpec {
  std::string type;  // "mock" | "http"
  nlohmann::json mock_script;
  std::optional<HttpBackendConfig> http;
};

struct Config {
  PipelineConfig pipeline;
  std::map<std::string, BackendSpec> backends;
  std::optional<std::filesystem::path> cache_path;
  std::optional<std::filesystem::path> image_dir;
  std::optional<std::filesystem::path> exemplars_path;
  RetryPolicy retry;
  int backend_concurrency = 4;
};

/// Replaces ${VAR} and ${VAR:-default} in every string value. Throws
/// Error(ConfigError) for an unset variable without a default.
nlohmann::json interpolate_env(const nlohmann::json& j);

/// Relative paths (cache_path, image_dir, exemplars, mock scripts) resolve
/// against `base_dir`.
Config config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
Config load_config(const std::filesystem::path& path);

/// Gateway with the configured MLLM and LLM backends registered.
std::unique_ptr<Gateway> make_gateway(const Config& config,
                                      std::function<void(std::chrono::milliseconds)> sleeper = {});

Exemplars load_exemplars(const Config& config);

}  // namespace atomcal
