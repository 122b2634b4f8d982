#include <httplib.h>

#include "atomcal/http_backend.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "atomcal/error.hpp"
#include "atomcal/hashing.hpp"
#include "atomcal/text.hpp"

namespace atomcal {

using nlohmann::json;

HttpBackendConfig HttpBackendConfig::openai_chat(std::string url) {
  HttpBackendConfig c;
  c.url = std::move(url);
  c.api_key_env = "OPENAI_API_KEY";
  c.request_template = json{
      {"model", "{{model}}"},
      {"messages", json::array({json{{"role", "user"}, {"content", "{{prompt}}"}}})},
      {"temperature", "{{temperature}}"},
      {"max_tokens", "{{max_tokens}}"},
      {"seed", "{{seed}}"},
      {"logprobs", "{{want_probabilities}}"},
  };
  c.image_request_template = json{
      {"model", "{{model}}"},
      {"messages",
       json::array({json{{"role", "user"},
                         {"content", json::array({json{{"type", "text"}, {"text", "{{prompt}}"}},
                                                  json{{"type", "image_url"},
                                                       {"image_url", json{{"url", "{{image_data_url}}"}}}}})}}})},
      {"temperature", "{{temperature}}"},
      {"max_tokens", "{{max_tokens}}"},
      {"seed", "{{seed}}"},
      {"logprobs", "{{want_probabilities}}"},
      {"top_logprobs", 5},
  };
  c.probabilities_pointer = "/choices/0/logprobs/content/0/top_logprobs";
  return c;
}

HttpBackendConfig HttpBackendConfig::from_json(const json& j) {
  HttpBackendConfig c = openai_chat(j.at("url").get<std::string>());
  if (j.contains("api_key_env")) {
    c.api_key_env = j["api_key_env"].is_null() ? std::nullopt : std::optional(j["api_key_env"].get<std::string>());
  }
  if (j.contains("request_template")) c.request_template = j["request_template"];
  if (j.contains("image_request_template")) c.image_request_template = j["image_request_template"];
  c.text_pointer = j.value("text_pointer", c.text_pointer);
  if (j.contains("probabilities_pointer")) {
    c.probabilities_pointer = j["probabilities_pointer"].is_null()
                                  ? std::nullopt
                                  : std::optional(j["probabilities_pointer"].get<std::string>());
  }
  c.token_field = j.value("token_field", c.token_field);
  c.probability_field = j.value("probability_field", c.probability_field);
  c.probability_is_log = j.value("probability_is_log", c.probability_is_log);
  c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  if (j.contains("headers")) c.headers = j["headers"].get<std::map<std::string, std::string>>();
  return c;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ImageNotFound, "cannot read image " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string mime_for(const std::filesystem::path& path) {
  const auto ext = text::to_lower(path.extension().string());
  if (ext == ".png") return "image/png";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "image/jpeg";
}

json substitute(const json& node, const std::map<std::string, json>& vars) {
  if (node.is_string()) {
    const auto& s = node.get_ref<const std::string&>();
    if (s.size() > 4 && s.starts_with("{{") && s.ends_with("}}")) {
      const auto it = vars.find(s.substr(2, s.size() - 4));
      if (it != vars.end()) return it->second;
    }
    std::string out = s;
    for (const auto& [name, value] : vars) {
      const std::string ph = "{{" + name + "}}";
      if (out.find(ph) == std::string::npos) continue;
      out = text::replace_all(std::move(out), ph, value.is_string() ? value.get<std::string>() : value.dump());
    }
    return out;
  }
  if (node.is_array()) {
    json arr = json::array();
    for (const auto& e : node) arr.push_back(substitute(e, vars));
    return arr;
  }
  if (node.is_object()) {
    json obj = json::object();
    for (const auto& [k, v] : node.items()) {
      json sub = substitute(v, vars);
      if (sub.is_null() && !v.is_null()) continue;
      obj[k] = std::move(sub);
    }
    return obj;
  }
  return node;
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigError, "backend url needs a scheme: " + config_.url);
  const auto path_start = config_.url.find('/', scheme_end + 3);
  scheme_host_port_ = config_.url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.url.substr(path_start);
}

json HttpBackend::build_body(const ModelRequest& request, const ResolvedImage* image) const {
  std::map<std::string, json> vars;
  vars["model"] = request.model_name;
  vars["prompt"] = request.prompt;
  vars["temperature"] = request.temperature;
  vars["max_tokens"] = request.max_tokens;
  vars["seed"] = request.seed ? json(*request.seed) : json(nullptr);
  vars["want_probabilities"] = request.want_probabilities;
  const json* tmpl = &config_.request_template;
  if (request.image_ref) {
    if (!image) throw Error(ErrorCode::ImageNotFound, "http backend needs image bytes; configure an image directory");
    const std::string b64 = base64_encode(read_file(image->path));
    vars["image_base64"] = b64;
    vars["image_data_url"] = "data:" + mime_for(image->path) + ";base64," + b64;
    if (config_.image_request_template) tmpl = &*config_.image_request_template;
  }
  return substitute(*tmpl, vars);
}

ModelResponse HttpBackend::parse_body(const std::string& body) const {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::BackendRefusal, std::string("response is not JSON: ") + e.what());
  }
  ModelResponse r;
  const json::json_pointer text_ptr(config_.text_pointer);
  if (!j.contains(text_ptr) || !j[text_ptr].is_string()) {
    throw Error(ErrorCode::BackendRefusal, "response lacks text at " + config_.text_pointer + ": " + body.substr(0, 300));
  }
  r.text = j[text_ptr].get<std::string>();
  if (config_.probabilities_pointer) {
    const json::json_pointer prob_ptr(*config_.probabilities_pointer);
    if (j.contains(prob_ptr) && j[prob_ptr].is_array()) {
      std::vector<TokenProbability> cands;
      for (const auto& c : j[prob_ptr]) {
        if (!c.contains(config_.token_field) || !c.contains(config_.probability_field)) continue;
        double p = c[config_.probability_field].get<double>();
        if (config_.probability_is_log) p = std::exp(p);
        cands.push_back({c[config_.token_field].get<std::string>(), std::clamp(p, 0.0, 1.0)});
      }
      r.token_probabilities = std::move(cands);
    }
  }
  return r;
}

ModelResponse HttpBackend::generate(const ModelRequest& request, const ResolvedImage* image) {
  const json body = build_body(request, image);

  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  client.set_write_timeout(config_.timeout_seconds, 0);

  httplib::Headers headers;
  for (const auto& [k, v] : config_.headers) headers.emplace(k, v);
  if (config_.api_key_env) {
    const char* key = std::getenv(config_.api_key_env->c_str());
    if (key == nullptr || *key == '\0') {
      throw Error(ErrorCode::BackendRefusal, "environment variable " + *config_.api_key_env + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const auto start = std::chrono::steady_clock::now();
  auto res = client.Post(path_, headers, body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);

  if (!res) throw Error(ErrorCode::TransportError, "request to " + config_.url + " failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw Error(ErrorCode::TransportError, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::BackendRefusal, "HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  ModelResponse r = parse_body(res->body);
  r.latency_ms = elapsed.count();
  return r;
}

}  // namespace atomcal
