#include "atomcal/mock_backend.hpp"

#include <fstream>

#include "atomcal/error.hpp"

namespace atomcal {

using nlohmann::json;

namespace {

json response_json(const ModelResponse& r) {
  json j;
  j["text"] = r.text;
  if (r.token_probabilities) {
    json arr = json::array();
    for (const auto& tp : *r.token_probabilities) arr.push_back(json::array({tp.token, tp.probability}));
    j["token_probabilities"] = std::move(arr);
  }
  if (r.latency_ms != 0) j["latency_ms"] = r.latency_ms;
  return j;
}

ModelResponse parse_response(const json& j) {
  ModelResponse r;
  r.text = j.value("text", "");
  if (j.contains("token_probabilities") && !j["token_probabilities"].is_null()) {
    std::vector<TokenProbability> v;
    for (const auto& e : j["token_probabilities"]) v.push_back({e.at(0).get<std::string>(), e.at(1).get<double>()});
    r.token_probabilities = std::move(v);
  }
  r.latency_ms = j.value("latency_ms", std::int64_t{0});
  return r;
}

}  // namespace

std::string MockBackend::exact_key(const std::string& prompt, const std::optional<std::string>& image_ref) {
  return image_ref.value_or("-") + '\x1f' + prompt;
}

void MockBackend::add(Entry entry) {
  std::lock_guard lock(mutex_);
  const std::size_t idx = entries_.size();
  if (!entry.contains) exact_.try_emplace(exact_key(entry.prompt, entry.image_ref), idx);
  entries_.push_back(std::move(entry));
}

void MockBackend::script(const std::string& prompt, const std::string& text,
                         std::optional<double> probability, std::optional<std::string> image_ref) {
  Entry e;
  e.prompt = prompt;
  e.image_ref = std::move(image_ref);
  e.response.text = text;
  if (probability) {
    // Probability of whichever class `text` states; the rest goes to the other class.
    const Answer a = normalize_answer(text);
    const std::string said = a == Answer::No ? "No" : "Yes";
    const std::string other = a == Answer::No ? "Yes" : "No";
    e.response.token_probabilities = std::vector<TokenProbability>{{said, *probability}, {other, 1.0 - *probability}};
  }
  add(std::move(e));
}

std::unique_ptr<MockBackend> MockBackend::from_json(const json& script) {
  auto mock = std::make_unique<MockBackend>();
  try {
    if (script.contains("default") && !script["default"].is_null()) mock->default_ = parse_response(script["default"]);
    for (const auto& j : script.value("entries", json::array())) {
      Entry e;
      e.prompt = j.at("prompt").get<std::string>();
      if (j.contains("image_ref") && !j["image_ref"].is_null()) e.image_ref = j["image_ref"].get<std::string>();
      const std::string match = j.value("match", "exact");
      if (match != "exact" && match != "contains") {
        throw Error(ErrorCode::SchemaError, "mock entry match must be 'exact' or 'contains'");
      }
      e.contains = match == "contains";
      e.response = parse_response(j);
      if (j.contains("error") && !j["error"].is_null()) {
        e.error = j["error"].get<std::string>();
        if (*e.error != "transport" && *e.error != "refusal") {
          throw Error(ErrorCode::SchemaError, "mock entry error must be 'transport' or 'refusal'");
        }
      }
      e.error_message = j.value("error_message", "scripted failure");
      e.fail_times = j.value("fail_times", -1);
      mock->add(std::move(e));
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::SchemaError, std::string("bad mock script: ") + ex.what());
  }
  return mock;
}

std::unique_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read mock script " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& ex) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + ex.what());
  }
}

json MockBackend::to_json() const {
  std::lock_guard lock(mutex_);
  json j;
  j["schema_version"] = 1;
  if (default_) j["default"] = response_json(*default_);
  json entries = json::array();
  for (const auto& e : entries_) {
    json ej = response_json(e.response);
    ej["prompt"] = e.prompt;
    ej["image_ref"] = e.image_ref ? json(*e.image_ref) : json(nullptr);
    ej["match"] = e.contains ? "contains" : "exact";
    if (e.error) {
      ej["error"] = *e.error;
      ej["error_message"] = e.error_message;
      if (e.fail_times >= 0) ej["fail_times"] = e.fail_times;
    }
    entries.push_back(std::move(ej));
  }
  j["entries"] = std::move(entries);
  return j;
}

ModelResponse MockBackend::generate(const ModelRequest& request, const ResolvedImage*) {
  std::lock_guard lock(mutex_);
  requests_.push_back(request);

  std::optional<std::size_t> hit;
  if (auto it = exact_.find(exact_key(request.prompt, request.image_ref)); it != exact_.end()) {
    hit = it->second;
  } else {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (!e.contains) continue;
      if (e.image_ref && e.image_ref != request.image_ref) continue;
      if (request.prompt.find(e.prompt) != std::string::npos) {
        hit = i;
        break;
      }
    }
  }
  if (!hit) {
    if (default_) return *default_;
    throw Error(ErrorCode::BackendRefusal, "mock backend has no scripted response for prompt: " + request.prompt.substr(0, 120));
  }

  const Entry& e = entries_[*hit];
  if (e.error) {
    int& served = failures_served_[*hit];
    if (e.fail_times < 0 || served < e.fail_times) {
      ++served;
      throw Error(*e.error == "transport" ? ErrorCode::TransportError : ErrorCode::BackendRefusal, e.error_message);
    }
  }
  return e.response;
}

std::size_t MockBackend::call_count() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

std::vector<ModelRequest> MockBackend::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

}  // namespace atomcal
