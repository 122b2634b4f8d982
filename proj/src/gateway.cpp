#include "atomcal/gateway.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <bit>
#include <cctype>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "atomcal/error.hpp"
#include "atomcal/hashing.hpp"
#include "atomcal/text.hpp"

namespace atomcal {

using nlohmann::json;

void validate_request(const ModelRequest& r) {
  if (r.backend_id.empty()) throw Error(ErrorCode::SchemaError, "request has empty backend_id");
  if (!std::isfinite(r.temperature) || r.temperature < 0.0 || r.temperature > 2.0) {
    throw Error(ErrorCode::SchemaError, "temperature must be finite and in [0, 2]");
  }
  if (r.max_tokens <= 0) throw Error(ErrorCode::SchemaError, "max_tokens must be positive");
  if (r.image_ref && !is_hex_digest(*r.image_ref)) {
    throw Error(ErrorCode::SchemaError, "image_ref must be a 64-char lowercase hex digest");
  }
}

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_field(std::string& out, char tag, std::string_view bytes) {
  out.push_back(tag);
  put_u64(out, bytes.size());
  out.append(bytes);
}

}  // namespace

std::string canonical_bytes(const ModelRequest& r) {
  std::string out = "atomcal.request.v1";
  out.push_back('\0');
  put_field(out, 'b', r.backend_id);
  put_field(out, 'm', r.model_name);
  put_field(out, 'p', r.prompt);
  out.push_back('i');
  out.push_back(r.image_ref ? '\1' : '\0');
  if (r.image_ref) put_field(out, 'I', *r.image_ref);
  // -0.0 and 0.0 are the same temperature.
  const double t = r.temperature == 0.0 ? 0.0 : r.temperature;
  out.push_back('t');
  put_u64(out, std::bit_cast<std::uint64_t>(t));
  out.push_back('n');
  put_u64(out, static_cast<std::uint64_t>(r.max_tokens));
  out.push_back('s');
  out.push_back(r.seed ? '\1' : '\0');
  if (r.seed) put_u64(out, static_cast<std::uint64_t>(*r.seed));
  out.push_back('w');
  out.push_back(r.want_probabilities ? '\1' : '\0');
  return out;
}

CacheKey cache_key(const ModelRequest& request) { return CacheKey{sha256_hex(canonical_bytes(request))}; }

namespace {

std::string first_content_token(std::string_view token) {
  std::string t(text::trim(token));
  // SentencePiece and GPT-2 BPE word-boundary markers.
  for (std::string_view marker : {"\xE2\x96\x81", "\xC4\xA0"}) {
    while (t.starts_with(marker)) t.erase(0, marker.size());
  }
  while (!t.empty() && !std::isalnum(static_cast<unsigned char>(t.back()))) t.pop_back();
  while (!t.empty() && !std::isalnum(static_cast<unsigned char>(t.front()))) t.erase(t.begin());
  return text::to_lower(t);
}

}  // namespace

YesNoMass yes_no_mass(const std::vector<TokenProbability>& candidates) {
  YesNoMass mass;
  for (const auto& c : candidates) {
    const auto tok = first_content_token(c.token);
    if (tok == "yes") mass.yes += c.probability;
    else if (tok == "no") mass.no += c.probability;
  }
  return mass;
}

double extract_yes_no_probability(const ModelResponse& response, Answer predicted) {
  if (!response.token_probabilities) {
    throw Error(ErrorCode::MissingProbabilities, "response carries no token probabilities");
  }
  for (const auto& c : *response.token_probabilities) {
    if (!(c.probability >= 0.0 && c.probability <= 1.0)) {
      throw Error(ErrorCode::MissingProbabilities, "token probability outside [0, 1]");
    }
  }
  const auto mass = yes_no_mass(*response.token_probabilities);
  const double total = mass.yes + mass.no;
  if (!(total > 0.0)) throw Error(ErrorCode::NoAnswerToken, "no yes/no token among candidates");
  if (predicted == Answer::Unparseable) predicted = mass.yes > mass.no ? Answer::Yes : Answer::No;
  const double p_yes = mass.yes / total;
  return predicted == Answer::Yes ? p_yes : 1.0 - p_yes;
}

double extract_yes_no_probability(const ModelResponse& response) {
  return extract_yes_no_probability(response, normalize_answer(response.text));
}

// ---------------------------------------------------------------------------
// JSON codecs for cache records.

namespace {

json request_to_json(const ModelRequest& r) {
  json j;
  j["backend_id"] = r.backend_id;
  j["model_name"] = r.model_name;
  j["prompt"] = r.prompt;
  j["image_ref"] = r.image_ref ? json(*r.image_ref) : json(nullptr);
  j["temperature"] = r.temperature;
  j["max_tokens"] = r.max_tokens;
  j["seed"] = r.seed ? json(*r.seed) : json(nullptr);
  j["want_probabilities"] = r.want_probabilities;
  return j;
}

ModelRequest request_from_json(const json& j) {
  ModelRequest r;
  r.backend_id = j.at("backend_id").get<std::string>();
  r.model_name = j.at("model_name").get<std::string>();
  r.prompt = j.at("prompt").get<std::string>();
  if (!j.at("image_ref").is_null()) r.image_ref = j.at("image_ref").get<std::string>();
  r.temperature = j.at("temperature").get<double>();
  r.max_tokens = j.at("max_tokens").get<int>();
  if (!j.at("seed").is_null()) r.seed = j.at("seed").get<std::int64_t>();
  r.want_probabilities = j.at("want_probabilities").get<bool>();
  return r;
}

json response_to_json(const ModelResponse& r) {
  json j;
  j["text"] = r.text;
  if (r.token_probabilities) {
    json arr = json::array();
    for (const auto& tp : *r.token_probabilities) arr.push_back(json::array({tp.token, tp.probability}));
    j["token_probabilities"] = std::move(arr);
  } else {
    j["token_probabilities"] = nullptr;
  }
  j["latency_ms"] = r.latency_ms;
  return j;
}

ModelResponse response_from_json(const json& j) {
  ModelResponse r;
  r.text = j.at("text").get<std::string>();
  if (!j.at("token_probabilities").is_null()) {
    std::vector<TokenProbability> v;
    for (const auto& e : j.at("token_probabilities")) {
      v.push_back({e.at(0).get<std::string>(), e.at(1).get<double>()});
    }
    r.token_probabilities = std::move(v);
  }
  r.latency_ms = j.at("latency_ms").get<std::int64_t>();
  return r;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void append_line(const std::filesystem::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::IoError, "cannot open cache file " + path.string());
  const ssize_t n = ::write(fd, line.data(), line.size());
  ::close(fd);
  if (n != static_cast<ssize_t>(line.size())) {
    throw Error(ErrorCode::IoError, "short write to cache file " + path.string());
  }
}

}  // namespace

// ---------------------------------------------------------------------------

ImageStore::ImageStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string ImageStore::digest_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ImageNotFound, "cannot read image " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

std::optional<std::filesystem::path> ImageStore::resolve(const std::string& digest) {
  std::call_once(indexed_, [this] {
    std::error_code ec;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir_, ec)) {
      if (!entry.is_regular_file()) continue;
      index_.emplace(digest_file(entry.path()), entry.path());
    }
  });
  const auto it = index_.find(digest);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------

ReplayCache::ReplayCache(std::filesystem::path path) : path_(std::move(path)) {
  for (auto& rec : read_records(path_)) entries_.try_emplace(rec.key.digest, std::move(rec.response));
}

std::vector<CacheRecord> ReplayCache::read_records(const std::filesystem::path& path,
                                                   std::size_t* skipped_lines) {
  std::vector<CacheRecord> records;
  std::size_t skipped = 0;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      CacheRecord rec;
      rec.key.digest = j.at("key").get<std::string>();
      rec.request = request_from_json(j.at("request"));
      rec.response = response_from_json(j.at("response"));
      rec.timestamp = j.value("timestamp", "");
      records.push_back(std::move(rec));
    } catch (const json::exception&) {
      ++skipped;
    }
  }
  if (skipped_lines) *skipped_lines = skipped;
  return records;
}

std::optional<ModelResponse> ReplayCache::find(const CacheKey& key) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(key.digest);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

ModelResponse ReplayCache::insert(const ModelRequest& request, const ModelResponse& response) {
  const CacheKey key = cache_key(request);
  std::unique_lock lock(mutex_);
  const auto [it, inserted] = entries_.try_emplace(key.digest, response);
  if (!inserted) return it->second;
  json rec;
  rec["key"] = key.digest;
  rec["request"] = request_to_json(request);
  rec["response"] = response_to_json(response);
  rec["timestamp"] = utc_timestamp();
  try {
    append_line(path_, rec.dump(-1, ' ', false, json::error_handler_t::replace) + "\n");
  } catch (...) {
    entries_.erase(it);
    throw;
  }
  return response;
}

std::size_t ReplayCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::size_t ReplayCache::compact() {
  std::unique_lock lock(mutex_);
  const auto records = read_records(path_);
  std::unordered_map<std::string, bool> seen;
  const auto tmp = std::filesystem::path(path_.string() + ".tmp");
  std::size_t dropped = 0;
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    for (const auto& r : records) {
      if (!seen.emplace(r.key.digest, true).second) {
        ++dropped;
        continue;
      }
      json rec;
      rec["key"] = r.key.digest;
      rec["request"] = request_to_json(r.request);
      rec["response"] = response_to_json(r.response);
      rec["timestamp"] = r.timestamp;
      out << rec.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    }
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path_);
  return dropped;
}

std::string_view to_string(CacheMode mode) noexcept {
  switch (mode) {
    case CacheMode::Record: return "record";
    case CacheMode::ReplayStrict: return "replay_strict";
    case CacheMode::Off: return "off";
  }
  return "off";
}

std::optional<CacheMode> cache_mode_from_string(std::string_view s) {
  if (s == "record") return CacheMode::Record;
  if (s == "replay_strict") return CacheMode::ReplayStrict;
  if (s == "off") return CacheMode::Off;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

Gateway::Gateway(GatewayOptions options) : options_(std::move(options)) {
  if (options_.cache_mode != CacheMode::Off) {
    if (!options_.cache_path) throw Error(ErrorCode::ConfigError, "cache mode requires a cache path");
    cache_ = std::make_unique<ReplayCache>(*options_.cache_path);
  }
  if (options_.image_dir) images_ = std::make_unique<ImageStore>(*options_.image_dir);
  if (!options_.sleeper) options_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (options_.per_backend_concurrency < 1 || options_.per_backend_concurrency > 1024) {
    throw Error(ErrorCode::ConfigError, "per-backend concurrency must be in [1, 1024]");
  }
  if (options_.retry.max_attempts < 1) throw Error(ErrorCode::ConfigError, "retry attempts must be >= 1");
}

Gateway::~Gateway() = default;

void Gateway::register_backend(const std::string& id, std::shared_ptr<Backend> backend, BackendKind kind) {
  Slot slot{std::move(backend), kind,
            std::make_unique<std::counting_semaphore<1024>>(options_.per_backend_concurrency)};
  backends_.insert_or_assign(id, std::move(slot));
}

bool Gateway::has_backend(const std::string& id) const { return backends_.contains(id); }

ModelResponse Gateway::call_with_retry(Slot& slot, const ModelRequest& request, const ResolvedImage* image) {
  auto backoff = options_.retry.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      slot.limit->acquire();
      struct Release {
        std::counting_semaphore<1024>* s;
        ~Release() { s->release(); }
      } release{slot.limit.get()};
      backend_calls_.fetch_add(1, std::memory_order_relaxed);
      return slot.backend->generate(request, image);
    } catch (const Error& e) {
      if (!e.retryable() || attempt >= options_.retry.max_attempts) throw;
    }
    retries_.fetch_add(1, std::memory_order_relaxed);
    options_.sleeper(backoff);
    backoff = std::chrono::milliseconds(
        static_cast<std::int64_t>(static_cast<double>(backoff.count()) * options_.retry.multiplier));
  }
}

ModelResponse Gateway::query(const ModelRequest& request) {
  calls_.fetch_add(1, std::memory_order_relaxed);
  validate_request(request);
  const auto it = backends_.find(request.backend_id);
  if (it == backends_.end()) throw Error(ErrorCode::UnknownBackend, "no backend registered as '" + request.backend_id + "'");
  Slot& slot = it->second;
  if (slot.kind == BackendKind::Mllm && !request.image_ref) {
    throw Error(ErrorCode::SchemaError, "multimodal backend '" + request.backend_id + "' requires image_ref");
  }
  if (slot.kind == BackendKind::Llm && request.image_ref) {
    throw Error(ErrorCode::SchemaError, "text-only backend '" + request.backend_id + "' given image_ref");
  }

  std::optional<CacheKey> key;
  if (cache_) {
    key = cache_key(request);
    if (auto hit = cache_->find(*key)) {
      cache_hits_.fetch_add(1, std::memory_order_relaxed);
      return *hit;
    }
    if (options_.cache_mode == CacheMode::ReplayStrict) {
      throw Error(ErrorCode::CacheMissInStrictReplay, "no cached response for key " + key->digest);
    }
  }

  std::optional<ResolvedImage> image;
  if (request.image_ref && images_) {
    auto path = images_->resolve(*request.image_ref);
    if (!path) throw Error(ErrorCode::ImageNotFound, "no image with digest " + *request.image_ref);
    image = ResolvedImage{*request.image_ref, *path};
  }

  ModelResponse response = call_with_retry(slot, request, image ? &*image : nullptr);
  if (response.token_probabilities) {
    for (const auto& tp : *response.token_probabilities) {
      if (!(tp.probability >= 0.0 && tp.probability <= 1.0)) {
        throw Error(ErrorCode::BackendRefusal, "backend returned probability outside [0, 1]");
      }
    }
  }
  if (cache_) return cache_->insert(request, response);
  return response;
}

GatewayStats Gateway::stats() const {
  return GatewayStats{calls_.load(), cache_hits_.load(), backend_calls_.load(), retries_.load()};
}

}  // namespace atomcal
