#include "atomcal/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "atomcal/error.hpp"
#include "atomcal/mock_backend.hpp"

namespace atomcal {

using nlohmann::json;

void PipelineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
  if (mllm_backend.empty() || llm_backend.empty()) fail("mllm_backend and llm_backend are required");
  if (mllm_backend == llm_backend) fail("mllm_backend and llm_backend must name different backends");
  if (n_paraphrases < 1) fail("n_paraphrases must be >= 1");
  if (parallelism < 1) fail("parallelism must be >= 1");
  if (mllm_temperature < 0.0 || llm_temperature < 0.0) fail("temperatures must be >= 0");
  if (mllm_max_tokens < 1 || answer_max_tokens < 1 || llm_max_tokens < 1) fail("max token limits must be >= 1");
  if (!(context_threshold >= 0.0 && context_threshold <= 1.0)) fail("context_threshold must be in [0, 1]");
  if (answer_template.find("{question}") == std::string::npos) fail("answer_template must contain {question}");
}

namespace {

std::string interpolate_string(const std::string& s) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto start = s.find("${", i);
    if (start == std::string::npos) {
      out.append(s, i, std::string::npos);
      break;
    }
    out.append(s, i, start - i);
    const auto end = s.find('}', start);
    if (end == std::string::npos) throw Error(ErrorCode::ConfigError, "unterminated ${ in: " + s);
    std::string body = s.substr(start + 2, end - start - 2);
    std::optional<std::string> fallback;
    if (auto sep = body.find(":-"); sep != std::string::npos) {
      fallback = body.substr(sep + 2);
      body.resize(sep);
    }
    const char* value = std::getenv(body.c_str());
    if (value != nullptr && *value != '\0') {
      out += value;
    } else if (fallback) {
      out += *fallback;
    } else {
      throw Error(ErrorCode::ConfigError, "environment variable " + body + " is not set");
    }
    i = end + 1;
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ConfigError, std::string("config field '") + key + "' has the wrong type");
  }
}

std::optional<std::string> opt_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(ErrorCode::ConfigError, std::string("config field '") + key + "' must be a string");
  return it->get<std::string>();
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> k{
      "schema_version",    "backends",         "mllm_backend",     "llm_backend",       "mllm_model",
      "llm_model",         "n_paraphrases",    "include_original", "estimator",         "aggregator",
      "context_threshold", "mllm_temperature", "llm_temperature",  "mllm_max_tokens",   "answer_max_tokens",
      "llm_max_tokens",    "seed",             "parallelism",      "cache_mode",        "cache_path",
      "image_dir",         "exemplars",        "answer_template",  "use_precomputed_initial",
      "retry",             "backend_concurrency"};
  return k;
}

}  // namespace

json interpolate_env(const json& j) {
  if (j.is_string()) return interpolate_string(j.get<std::string>());
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(interpolate_env(v));
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : j.items()) out[k] = interpolate_env(v);
    return out;
  }
  return j;
}

Config config_from_json(const json& raw, const std::filesystem::path& base_dir) {
  if (!raw.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
  for (const auto& [k, v] : raw.items()) {
    if (!known_keys().contains(k)) throw Error(ErrorCode::ConfigError, "unknown config field '" + k + "'");
  }
  const json j = interpolate_env(raw);
  if (get_or<int>(j, "schema_version", kConfigSchemaVersion) != kConfigSchemaVersion) {
    throw Error(ErrorCode::ConfigError, "unsupported config schema_version");
  }
  Config c;
  PipelineConfig& p = c.pipeline;
  p.mllm_backend = get_or<std::string>(j, "mllm_backend", p.mllm_backend);
  p.llm_backend = get_or<std::string>(j, "llm_backend", p.llm_backend);
  p.mllm_model = get_or<std::string>(j, "mllm_model", p.mllm_model);
  p.llm_model = get_or<std::string>(j, "llm_model", p.llm_model);
  p.n_paraphrases = get_or<int>(j, "n_paraphrases", p.n_paraphrases);
  p.include_original = get_or<bool>(j, "include_original", p.include_original);
  if (auto s = opt_string(j, "estimator")) {
    auto e = estimator_from_string(*s);
    if (!e) throw Error(ErrorCode::ConfigError, "unknown estimator '" + *s + "'");
    p.estimator = *e;
  }
  if (auto s = opt_string(j, "aggregator")) {
    auto a = aggregator_from_string(*s);
    if (!a) throw Error(ErrorCode::ConfigError, "unknown aggregator '" + *s + "'");
    p.aggregator = *a;
  }
  p.context_threshold = get_or<double>(j, "context_threshold", p.context_threshold);
  p.mllm_temperature = get_or<double>(j, "mllm_temperature", p.mllm_temperature);
  p.llm_temperature = get_or<double>(j, "llm_temperature", p.llm_temperature);
  p.mllm_max_tokens = get_or<int>(j, "mllm_max_tokens", p.mllm_max_tokens);
  p.answer_max_tokens = get_or<int>(j, "answer_max_tokens", p.answer_max_tokens);
  p.llm_max_tokens = get_or<int>(j, "llm_max_tokens", p.llm_max_tokens);
  if (j.contains("seed") && !j["seed"].is_null()) p.seed = get_or<std::int64_t>(j, "seed", 0);
  p.parallelism = get_or<int>(j, "parallelism", p.parallelism);
  if (auto s = opt_string(j, "cache_mode")) {
    auto m = cache_mode_from_string(*s);
    if (!m) throw Error(ErrorCode::ConfigError, "unknown cache_mode '" + *s + "'");
    p.cache_mode = *m;
  }
  p.answer_template = get_or<std::string>(j, "answer_template", p.answer_template);
  p.use_precomputed_initial = get_or<bool>(j, "use_precomputed_initial", p.use_precomputed_initial);

  if (auto s = opt_string(j, "cache_path")) c.cache_path = resolve(base_dir, *s);
  if (auto s = opt_string(j, "image_dir")) c.image_dir = resolve(base_dir, *s);
  if (auto s = opt_string(j, "exemplars")) c.exemplars_path = resolve(base_dir, *s);
  if (auto it = j.find("retry"); it != j.end() && !it->is_null()) {
    c.retry.max_attempts = get_or<int>(*it, "max_attempts", c.retry.max_attempts);
    c.retry.initial_backoff =
        std::chrono::milliseconds(get_or<long>(*it, "initial_backoff_ms", static_cast<long>(c.retry.initial_backoff.count())));
    c.retry.multiplier = get_or<double>(*it, "multiplier", c.retry.multiplier);
    if (c.retry.max_attempts < 1) throw Error(ErrorCode::ConfigError, "retry.max_attempts must be >= 1");
  }
  c.backend_concurrency = get_or<int>(j, "backend_concurrency", c.backend_concurrency);

  auto backends = j.find("backends");
  if (backends == j.end() || !backends->is_object()) throw Error(ErrorCode::ConfigError, "config needs a 'backends' object");
  for (const auto& [id, spec] : backends->items()) {
    BackendSpec b;
    b.type = get_or<std::string>(spec, "type", "");
    if (b.type == "mock") {
      auto script = spec.find("script");
      if (script == spec.end()) throw Error(ErrorCode::ConfigError, "mock backend '" + id + "' needs 'script'");
      if (script->is_string()) {
        const auto path = resolve(base_dir, script->get<std::string>());
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::IoError, "cannot read mock script " + path.string());
        try {
          b.mock_script = json::parse(in);
        } catch (const json::exception& e) {
          throw Error(ErrorCode::ConfigError, "mock script " + path.string() + ": " + e.what());
        }
      } else {
        b.mock_script = *script;
      }
    } else if (b.type == "http") {
      try {
        b.http = HttpBackendConfig::from_json(spec);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, "backend '" + id + "': " + e.what());
      }
    } else {
      throw Error(ErrorCode::ConfigError, "backend '" + id + "' has unknown type '" + b.type + "'");
    }
    c.backends.emplace(id, std::move(b));
  }
  p.validate();
  for (const auto& id : {p.mllm_backend, p.llm_backend}) {
    if (!c.backends.contains(id)) throw Error(ErrorCode::ConfigError, "backend '" + id + "' is not defined");
  }
  if (p.cache_mode != CacheMode::Off && !c.cache_path) {
    throw Error(ErrorCode::ConfigError, "cache_mode " + std::string(to_string(p.cache_mode)) + " needs cache_path");
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

std::unique_ptr<Gateway> make_gateway(const Config& config, std::function<void(std::chrono::milliseconds)> sleeper) {
  GatewayOptions opts;
  opts.cache_mode = config.pipeline.cache_mode;
  opts.cache_path = config.cache_path;
  opts.image_dir = config.image_dir;
  opts.retry = config.retry;
  opts.per_backend_concurrency = config.backend_concurrency;
  opts.sleeper = std::move(sleeper);
  auto gw = std::make_unique<Gateway>(std::move(opts));
  auto make = [&](const std::string& id) -> std::shared_ptr<Backend> {
    const BackendSpec& spec = config.backends.at(id);
    if (spec.type == "mock") return std::shared_ptr<Backend>(MockBackend::from_json(spec.mock_script));
    return std::make_shared<HttpBackend>(*spec.http);
  };
  gw->register_backend(config.pipeline.mllm_backend, make(config.pipeline.mllm_backend), BackendKind::Mllm);
  gw->register_backend(config.pipeline.llm_backend, make(config.pipeline.llm_backend), BackendKind::Llm);
  return gw;
}

Exemplars load_exemplars(const Config& config) {
  return config.exemplars_path ? Exemplars::from_file(*config.exemplars_path) : Exemplars::defaults();
}

}  // namespace atomcal
