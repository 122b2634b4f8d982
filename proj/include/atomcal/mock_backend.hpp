#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "atomcal/gateway.hpp"

namespace atomcal {

/// Scripted backend for tests and offline fixtures.
///
/// Responses are looked up by (prompt, image_ref): exact entries first, then
/// `contains` entries in script order, then the default. An entry may instead
/// script a failure ("transport" or "refusal"); a transport failure can be
/// limited to the first `fail_times` calls so retry paths can be exercised.
///
/// Script file layout:
///   {"schema_version": 1,
///    "default": {"text": "..."},                      // optional
///    "entries": [{"prompt": "...", "image_ref": "<hex>"|null,
///                 "match": "exact"|"contains",
///                 "text": "...", "token_probabilities": [["Yes", 0.9], ...],
///                 "latency_ms": 0,
///                 "error": "transport"|"refusal", "error_message": "...",
///                 "fail_times": 1}]}
class MockBackend final : public Backend {
public:
  struct Entry {
    std::string prompt;
    std::optional<std::string> image_ref;
    bool contains = false;
    ModelResponse response;
    std::optional<std::string> error;  // "transport" | "refusal"
    std::string error_message;
    int fail_times = -1;               // -1: always fail when `error` is set
  };

  MockBackend() = default;

  static std::unique_ptr<MockBackend> from_json(const nlohmann::json& script);
  static std::unique_ptr<MockBackend> from_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  void add(Entry entry);
  /// Exact-match shorthand.
  void script(const std::string& prompt, const std::string& text,
              std::optional<double> yes_or_no_probability = std::nullopt,
              std::optional<std::string> image_ref = std::nullopt);
  void set_default(ModelResponse response) { default_ = std::move(response); }

  ModelResponse generate(const ModelRequest& request, const ResolvedImage* image) override;

  std::size_t call_count() const;
  std::vector<ModelRequest> requests() const;

private:
  static std::string exact_key(const std::string& prompt, const std::optional<std::string>& image_ref);

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> exact_;
  std::optional<ModelResponse> default_;
  mutable std::mutex mutex_;
  std::unordered_map<std::size_t, int> failures_served_;
  std::vector<ModelRequest> requests_;
};

}  // namespace atomcal
