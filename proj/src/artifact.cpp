#include "atomcal/artifact.hpp"

#include <fstream>
#include <sstream>

#include "atomcal/error.hpp"
#include "atomcal/text.hpp"

namespace atomcal {

using nlohmann::json;

bool RunArtifact::has_flag(std::string_view prefix) const {
  for (const auto& f : flags) {
    if (f.starts_with(prefix)) return true;
  }
  return false;
}

namespace {

json opt(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

json tuple_json(const AtomicTuple& t) {
  return json{{"id", t.id},
              {"category", to_string(t.category.category)},
              {"subcategory", to_string(t.category.subcategory)},
              {"argument", t.argument}};
}

AtomicTuple tuple_from(const json& j) {
  AtomicTuple t;
  t.id = j.at("id").get<int>();
  auto cat = taxonomy_from_strings(j.at("category").get<std::string>(), j.at("subcategory").get<std::string>());
  if (!cat) throw Error(ErrorCode::SchemaError, "artifact tuple has an unknown category");
  t.category = *cat;
  t.argument = j.at("argument").get<std::string>();
  return t;
}

json query_json(const AtomicQuery& q) {
  return json{{"id", q.id},
              {"text", q.text},
              {"passthrough", q.passthrough},
              {"source_tuple", q.source_tuple ? tuple_json(*q.source_tuple) : json(nullptr)}};
}

AtomicQuery query_from(const json& j) {
  AtomicQuery q;
  q.id = j.at("id").get<int>();
  q.text = j.at("text").get<std::string>();
  q.passthrough = j.at("passthrough").get<bool>();
  if (!j.at("source_tuple").is_null()) q.source_tuple = tuple_from(j["source_tuple"]);
  return q;
}

Answer answer_from(const json& j) {
  auto a = answer_from_string(j.get<std::string>());
  if (!a) throw Error(ErrorCode::SchemaError, "artifact has an invalid answer: " + j.dump());
  return *a;
}

json record_json(const VerificationRecord& r) {
  json samples = json::array();
  for (const auto& s : r.samples) {
    samples.push_back(json{{"question_index", s.question_index},
                           {"answer", to_string(s.answer)},
                           {"probability", s.probability ? json(*s.probability) : json(nullptr)}});
  }
  json result = nullptr;
  if (r.result) {
    result = json{{"majority", to_string(r.result->majority)},
                  {"score", r.result->score},
                  {"estimator", to_string(r.result->estimator)},
                  {"aggregator", to_string(r.result->aggregator)},
                  {"n_effective", r.result->n_effective}};
  }
  return json{{"query", query_json(r.query)},
              {"paraphrases", r.paraphrases},
              {"raw_answers", r.raw_answers},
              {"samples", std::move(samples)},
              {"result", std::move(result)}};
}

VerificationRecord record_from(const json& j) {
  VerificationRecord r;
  r.query = query_from(j.at("query"));
  r.paraphrases = j.at("paraphrases").get<std::vector<std::string>>();
  r.raw_answers = j.at("raw_answers").get<std::vector<std::string>>();
  for (const auto& s : j.at("samples")) {
    AnswerSample a;
    a.question_index = s.at("question_index").get<int>();
    a.answer = answer_from(s.at("answer"));
    if (!s.at("probability").is_null()) a.probability = s["probability"].get<double>();
    r.samples.push_back(a);
  }
  if (const auto& res = j.at("result"); !res.is_null()) {
    ConfidenceResult c;
    c.majority = answer_from(res.at("majority"));
    c.score = res.at("score").get<double>();
    auto e = estimator_from_string(res.at("estimator").get<std::string>());
    auto g = aggregator_from_string(res.at("aggregator").get<std::string>());
    if (!e || !g) throw Error(ErrorCode::SchemaError, "artifact result has an unknown estimator or aggregator");
    c.estimator = *e;
    c.aggregator = *g;
    c.n_effective = res.at("n_effective").get<int>();
    r.result = c;
  }
  return r;
}

}  // namespace

json to_json(const RunArtifact& a) {
  json tuples = json::array();
  for (const auto& t : a.tuples) tuples.push_back(tuple_json(t));
  json queries = json::array();
  for (const auto& q : a.queries) queries.push_back(query_json(q));
  json records = json::array();
  for (const auto& r : a.records) records.push_back(record_json(r));
  json context = json::array();
  for (const auto& e : a.context.entries) {
    context.push_back(json{{"question", e.question}, {"answer", to_string(e.answer)}, {"confidence", e.confidence}});
  }
  return json{{"schema_version", a.schema_version},
              {"example_id", a.example_id},
              {"question", a.question},
              {"image_ref", a.image_ref},
              {"initial_answer", opt(a.initial_answer)},
              {"passthrough", a.passthrough},
              {"tuples", std::move(tuples)},
              {"queries", std::move(queries)},
              {"records", std::move(records)},
              {"context", std::move(context)},
              {"final_answer", opt(a.final_answer)},
              {"flags", a.flags},
              {"error", opt(a.error)},
              {"latency_ms", a.latency_ms},
              {"gateway_calls", a.gateway_calls}};
}

RunArtifact artifact_from_json(const json& j) {
  try {
    RunArtifact a;
    a.schema_version = j.at("schema_version").get<int>();
    if (a.schema_version != kArtifactSchemaVersion) {
      throw Error(ErrorCode::SchemaError, "unsupported artifact schema_version " + std::to_string(a.schema_version));
    }
    a.example_id = j.at("example_id").get<std::string>();
    a.question = j.at("question").get<std::string>();
    a.image_ref = j.at("image_ref").get<std::string>();
    if (!j.at("initial_answer").is_null()) a.initial_answer = j["initial_answer"].get<std::string>();
    a.passthrough = j.at("passthrough").get<bool>();
    for (const auto& t : j.at("tuples")) a.tuples.push_back(tuple_from(t));
    for (const auto& q : j.at("queries")) a.queries.push_back(query_from(q));
    for (const auto& r : j.at("records")) a.records.push_back(record_from(r));
    for (const auto& e : j.at("context")) {
      a.context.entries.push_back(
          {e.at("question").get<std::string>(), answer_from(e.at("answer")), e.at("confidence").get<double>()});
    }
    if (!j.at("final_answer").is_null()) a.final_answer = j["final_answer"].get<std::string>();
    a.flags = j.at("flags").get<std::vector<std::string>>();
    if (!j.at("error").is_null()) a.error = j["error"].get<std::string>();
    a.latency_ms = j.at("latency_ms").get<std::int64_t>();
    a.gateway_calls = j.at("gateway_calls").get<int>();
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed artifact: ") + e.what());
  }
}

std::string serialize_artifact(const RunArtifact& a) {
  return to_json(a).dump(-1, ' ', false, json::error_handler_t::replace);
}

ArtifactFile read_artifacts(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();

  ArtifactFile out;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos < content.size()) {
    ++lineno;
    const auto nl = content.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string line = content.substr(pos, terminated ? nl - pos : std::string::npos);
    const std::size_t next = terminated ? nl + 1 : content.size();
    if (text::trim(line).empty()) {
      pos = next;
      out.valid_bytes = next;
      continue;
    }
    try {
      out.artifacts.push_back(artifact_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      if (!terminated) {
        out.torn_tail = true;
        break;
      }
      throw Error(ErrorCode::ParseError, path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!terminated) {
      // A complete record that lost only its newline.
      out.torn_tail = true;
      out.artifacts.pop_back();
      break;
    }
    pos = next;
    out.valid_bytes = next;
  }
  return out;
}

}  // namespace atomcal
