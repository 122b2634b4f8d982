#pragma once

#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "atomcal/gateway.hpp"

namespace atomcal {

/// Settings for a JSON-over-HTTP model endpoint.
///
/// The request body is built from `request_template` (or
/// `image_request_template` when the request carries an image). Any string
/// value that is exactly a placeholder is replaced by a typed value, and
/// placeholders embedded in longer strings are substituted as text. An object
/// member whose placeholder resolves to null is removed.
///
/// Placeholders: {{model}} {{prompt}} {{temperature}} {{max_tokens}} {{seed}}
/// {{want_probabilities}} {{image_base64}} {{image_data_url}}.
///
/// The bearer token is read from the environment variable named by
/// `api_key_env` at call time; it never appears in configs or caches.
struct HttpBackendConfig {
  std::string url;
  std::optional<std::string> api_key_env;
  nlohmann::json request_template;
  std::optional<nlohmann::json> image_request_template;
  std::string text_pointer = "/choices/0/message/content";
  /// JSON pointer to an array of candidate objects for the first token.
  std::optional<std::string> probabilities_pointer;
  std::string token_field = "token";
  std::string probability_field = "logprob";
  bool probability_is_log = true;
  int timeout_seconds = 120;
  std::map<std::string, std::string> headers;

  /// OpenAI-compatible chat-completions defaults.
  static HttpBackendConfig openai_chat(std::string url);
  static HttpBackendConfig from_json(const nlohmann::json& j);
};

class HttpBackend final : public Backend {
public:
  explicit HttpBackend(HttpBackendConfig config);

  ModelResponse generate(const ModelRequest& request, const ResolvedImage* image) override;

  /// Exposed for tests: the body that would be sent for `request`.
  nlohmann::json build_body(const ModelRequest& request, const ResolvedImage* image) const;

  /// Exposed for tests: maps a response body to a ModelResponse.
  ModelResponse parse_body(const std::string& body) const;

private:
  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

}  // namespace atomcal
