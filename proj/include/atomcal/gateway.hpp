#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "atomcal/answer.hpp"

namespace atomcal {

struct TokenProbability {
  std::string token;
  double probability = 0.0;

  bool operator==(const TokenProbability&) const = default;
};

/// One call to a model backend. `image_ref` is the hex SHA-256 digest of the
/// image bytes; it is set exactly when the backend is multimodal.
struct ModelRequest {
  std::string backend_id;
  std::string model_name;
  std::string prompt;
  std::optional<std::string> image_ref;
  double temperature = 0.0;
  int max_tokens = 1;
  std::optional<std::int64_t> seed;
  bool want_probabilities = false;

  bool operator==(const ModelRequest&) const = default;
};

struct ModelResponse {
  std::string text;
  /// Candidate tokens at the first answer position.
  std::optional<std::vector<TokenProbability>> token_probabilities;
  std::int64_t latency_ms = 0;

  bool operator==(const ModelResponse&) const = default;
};

struct CacheKey {
  std::string digest;  // 64 lowercase hex chars

  auto operator<=>(const CacheKey&) const = default;
};

/// Throws Error(SchemaError) on out-of-range fields.
void validate_request(const ModelRequest& request);

/// Field-ordered, length-prefixed encoding of every request field. This is the
/// exact byte string the cache key hashes, so it must never change shape
/// without bumping the version tag it starts with.
std::string canonical_bytes(const ModelRequest& request);

CacheKey cache_key(const ModelRequest& request);

/// p(predicted class) after restricting the first-position distribution to
/// yes/no. The predicted class comes from the response text when it parses,
/// otherwise from whichever of yes/no carries more mass.
double extract_yes_no_probability(const ModelResponse& response);

/// Same as above with the predicted class supplied by the caller.
double extract_yes_no_probability(const ModelResponse& response, Answer predicted);

/// Yes/no probability mass, before normalization.
struct YesNoMass {
  double yes = 0.0;
  double no = 0.0;
};
YesNoMass yes_no_mass(const std::vector<TokenProbability>& candidates);

// ---------------------------------------------------------------------------

struct ResolvedImage {
  std::string digest;
  std::filesystem::path path;
};

class Backend {
public:
  virtual ~Backend() = default;

  /// Throws Error(TransportError) for retryable failures and
  /// Error(BackendRefusal) for everything else. `image` is null for text-only
  /// requests, and for multimodal requests when no image directory is set.
  virtual ModelResponse generate(const ModelRequest& request, const ResolvedImage* image) = 0;
};

enum class BackendKind { Mllm, Llm };

/// Maps content digests to files in a directory. The directory is hashed
/// once on first lookup.
class ImageStore {
public:
  explicit ImageStore(std::filesystem::path dir);

  std::optional<std::filesystem::path> resolve(const std::string& digest);

  static std::string digest_file(const std::filesystem::path& path);

private:
  std::filesystem::path dir_;
  std::once_flag indexed_;
  std::unordered_map<std::string, std::filesystem::path> index_;
};

struct CacheRecord {
  CacheKey key;
  ModelRequest request;
  ModelResponse response;
  std::string timestamp;
};

/// Append-only JSONL store of model responses keyed by CacheKey. Each insert
/// appends one complete line with a single write; a torn trailing line left by
/// a crash is skipped on load. compact() rewrites the file through a temp file
/// and a rename.
class ReplayCache {
public:
  explicit ReplayCache(std::filesystem::path path);

  std::optional<ModelResponse> find(const CacheKey& key) const;

  /// Stores the response unless the key is already present and returns the
  /// response now associated with the key.
  ModelResponse insert(const ModelRequest& request, const ModelResponse& response);

  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

  /// Rewrites the file keeping the first record per key. Returns the number
  /// of records dropped.
  std::size_t compact();

  /// Reads every well-formed record in file order, duplicates included.
  static std::vector<CacheRecord> read_records(const std::filesystem::path& path,
                                               std::size_t* skipped_lines = nullptr);

private:
  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, ModelResponse> entries_;
};

enum class CacheMode { Record, ReplayStrict, Off };

std::string_view to_string(CacheMode mode) noexcept;
std::optional<CacheMode> cache_mode_from_string(std::string_view s);

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
};

struct GatewayOptions {
  CacheMode cache_mode = CacheMode::Off;
  std::optional<std::filesystem::path> cache_path;
  std::optional<std::filesystem::path> image_dir;
  RetryPolicy retry;
  int per_backend_concurrency = 4;
  /// Replaced in tests to avoid real sleeps.
  std::function<void(std::chrono::milliseconds)> sleeper;
};

struct GatewayStats {
  std::uint64_t calls = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t backend_calls = 0;
  std::uint64_t retries = 0;
};

/// Routes requests to registered backends through the replay cache.
/// Thread-safe; backends must be registered before the first query.
class Gateway {
public:
  explicit Gateway(GatewayOptions options = {});
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  void register_backend(const std::string& id, std::shared_ptr<Backend> backend, BackendKind kind);
  bool has_backend(const std::string& id) const;

  ModelResponse query(const ModelRequest& request);

  GatewayStats stats() const;
  CacheMode cache_mode() const { return options_.cache_mode; }
  ReplayCache* cache() { return cache_.get(); }

private:
  struct Slot {
    std::shared_ptr<Backend> backend;
    BackendKind kind;
    std::unique_ptr<std::counting_semaphore<1024>> limit;
  };

  ModelResponse call_with_retry(Slot& slot, const ModelRequest& request, const ResolvedImage* image);

  GatewayOptions options_;
  std::unique_ptr<ReplayCache> cache_;
  std::unique_ptr<ImageStore> images_;
  std::map<std::string, Slot> backends_;
  std::atomic<std::uint64_t> calls_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> backend_calls_{0};
  std::atomic<std::uint64_t> retries_{0};
};

}  // namespace atomcal
