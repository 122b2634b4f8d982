#include "atomcal/fixtures.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <random>

#include "atomcal/confidence.hpp"
#include "atomcal/error.hpp"
#include "atomcal/mock_backend.hpp"
#include "atomcal/query_gen.hpp"
#include "atomcal/reformulation.hpp"
#include "atomcal/refinement.hpp"

namespace atomcal {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 20> kObjects{
    "dog",   "cat",  "car",   "bench", "umbrella", "bottle", "chair", "horse", "kite",   "clock",
    "bicycle", "laptop", "cup", "sink", "train",   "boat",   "bird",  "book",  "vase", "pizza"};

// Paraphrase templates for "Is there a <obj> in the image?"; none repeats it.
constexpr std::array<std::string_view, 12> kImageTemplates{
    "Does the image contain a {o}?",      "Is a {o} present in the image?",   "Can you see a {o} in the image?",
    "Is there any {o} in the image?",     "Does a {o} appear in the image?",  "Is a {o} visible in the image?",
    "Can a {o} be seen in the image?",    "Is there a {o} shown in the image?", "Does the image show a {o}?",
    "Is a {o} depicted in the image?",    "Does the picture in the image include a {o}?",
    "Is there a {o} somewhere in the image?"};

// Paraphrase templates for "Is there a <obj>?".
constexpr std::array<std::string_view, 12> kBareTemplates{
    "Is a {o} present?",          "Can you see a {o}?",       "Is there any {o}?",       "Does a {o} appear?",
    "Is a {o} visible?",          "Can a {o} be seen?",       "Is there a {o} shown?",   "Is a {o} depicted?",
    "Does the scene have a {o}?", "Is a {o} in view?",        "Is there a {o} pictured?", "Does a {o} exist here?"};

// Reproducible across standard libraries, unlike the <random> distributions.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

private:
  std::mt19937_64 engine_;
};

std::string fill(std::string_view tmpl, std::string_view obj) {
  std::string s(tmpl);
  const auto pos = s.find("{o}");
  return s.replace(pos, 3, obj);
}

std::vector<std::string> paraphrases_of(const std::array<std::string_view, 12>& templates, std::string_view obj,
                                        int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(fill(templates[static_cast<std::size_t>(i)], obj));
  return out;
}

std::string image_name(std::string_view scenario, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu.jpg", std::string(scenario).c_str(), i);
  return buf;
}

std::string yes_no(bool yes) { return yes ? "Yes" : "No"; }

json base_config(int paraphrases) {
  return json{{"schema_version", 1},
              {"backends",
               {{"mllm", {{"type", "mock"}, {"script", "mllm_script.json"}}},
                {"llm", {{"type", "mock"}, {"script", "llm_script.json"}}}}},
              {"mllm_backend", "mllm"},
              {"llm_backend", "llm"},
              {"mllm_model", "mock-mllm"},
              {"llm_model", "mock-llm"},
              {"n_paraphrases", paraphrases},
              {"estimator", "self_consistency"},
              {"aggregator", "mean"},
              {"seed", 0},
              {"parallelism", 1},
              {"cache_mode", "off"},
              {"cache_path", "cache.jsonl"}};
}

// Binary existence questions, answered by sampling each paraphrase answer.
struct BinaryItem {
  std::string object;
  Answer gold;
  bool direct_yes;
  double reliability;  // probability each paraphrase answer is correct
};

FixtureSet binary_fixture(const FixtureOptions& opt, const std::string& scenario, std::vector<BinaryItem> items) {
  FixtureSet fx;
  MockBackend mllm;
  MockBackend llm;
  Rng rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    DatasetExample ex;
    ex.example_id = scenario + "-" + std::to_string(i);
    ex.image = image_name(scenario, i);
    ex.image_ref = name_digest(ex.image);
    ex.question = "Is there a " + it.object + " in the image?";
    ex.gold = it.gold;
    ex.group_keys.emplace(keys::kSplit, scenario);
    fx.dataset.push_back(ex);

    mllm.script(ex.question, yes_no(it.direct_yes), std::nullopt, ex.image_ref);
    const AtomicQuery q{1, ex.question, std::nullopt, true};
    const auto paras = paraphrases_of(kImageTemplates, it.object, opt.paraphrases);
    llm.script(build_paraphrase_prompt(q, opt.paraphrases), render_numbered_list(paras));
    for (const auto& p : paras) {
      const bool correct = rng.bernoulli(it.reliability);
      const bool says_yes = (it.gold == Answer::Yes) == correct;
      mllm.script(p, yes_no(says_yes), it.reliability, ex.image_ref);
    }
  }
  fx.mllm_script = mllm.to_json();
  fx.llm_script = llm.to_json();
  fx.config = base_config(opt.paraphrases);
  return fx;
}

FixtureSet passthrough_pope(const FixtureOptions& opt) {
  Rng rng(opt.seed);
  const int n = opt.examples.value_or(50);
  std::vector<BinaryItem> items;
  for (int i = 0; i < n; ++i) {
    BinaryItem it;
    it.object = std::string(kObjects[rng.index(kObjects.size())]);
    it.gold = i % 2 == 0 ? Answer::Yes : Answer::No;
    it.direct_yes = rng.bernoulli(0.8) == (it.gold == Answer::Yes);
    it.reliability = 0.65 + 0.3 * rng.uniform();
    items.push_back(std::move(it));
  }
  return binary_fixture(opt, "passthrough_pope", std::move(items));
}

FixtureSet yes_biased(const FixtureOptions& opt) {
  if (!(opt.bias >= 0.0 && opt.bias <= 0.5)) throw Error(ErrorCode::ConfigError, "bias must be in [0, 0.5]");
  Rng rng(opt.seed);
  const int n = opt.examples.value_or(200);
  std::vector<Answer> golds;
  for (int i = 0; i < n; ++i) golds.push_back(i < n / 2 ? Answer::Yes : Answer::No);
  // Fisher-Yates with the portable generator.
  for (std::size_t i = golds.size(); i > 1; --i) std::swap(golds[i - 1], golds[rng.index(i)]);
  std::vector<BinaryItem> items;
  for (int i = 0; i < n; ++i) {
    BinaryItem it;
    it.object = std::string(kObjects[rng.index(kObjects.size())]);
    it.gold = golds[static_cast<std::size_t>(i)];
    it.direct_yes = rng.bernoulli(0.5 + opt.bias);
    it.reliability = 0.5 + 0.5 * rng.uniform();
    items.push_back(std::move(it));
  }
  FixtureSet fx = binary_fixture(opt, "yes_biased_model", std::move(items));
  fx.config["estimator"] = "self_consistency";
  return fx;
}

FixtureSet generative_caption(const FixtureOptions& opt) {
  Rng rng(opt.seed);
  const int n = opt.examples.value_or(10);
  const Exemplars& shots = Exemplars::defaults();
  FixtureSet fx;
  MockBackend mllm;
  MockBackend llm;
  json lexicon = json::object();
  for (auto o : kObjects) lexicon[std::string(o)] = std::string(o);

  const std::string question = "Describe the image in detail.";
  for (int i = 0; i < n; ++i) {
    // Three distinct objects; the last one is not in the image.
    std::vector<std::string> objs;
    while (objs.size() < 3) {
      std::string o(kObjects[rng.index(kObjects.size())]);
      if (std::find(objs.begin(), objs.end(), o) == objs.end()) objs.push_back(o);
    }
    DatasetExample ex;
    ex.example_id = "generative_caption-" + std::to_string(i);
    ex.image = image_name("generative_caption", static_cast<std::size_t>(i));
    ex.image_ref = name_digest(ex.image);
    ex.question = question;
    ex.gold_objects = std::set<std::string>{objs[0], objs[1]};
    ex.hallucination_targets = {objs[2]};
    fx.dataset.push_back(ex);

    const std::string initial =
        "There is a " + objs[0] + " and a " + objs[1] + ". A " + objs[2] + " is also visible.";
    mllm.script(question, initial, std::nullopt, ex.image_ref);

    std::vector<AtomicTuple> tuples;
    std::string tuple_text;
    std::string question_text;
    std::vector<AtomicQuery> queries;
    for (int k = 0; k < 3; ++k) {
      AtomicTuple t{k + 1, {Category::Entity, Subcategory::Whole}, objs[static_cast<std::size_t>(k)]};
      tuples.push_back(t);
      tuple_text += render_tuple(t) + "\n";
      AtomicQuery q{k + 1, "Is there a " + objs[static_cast<std::size_t>(k)] + "?", t, false};
      question_text += std::to_string(k + 1) + " | " + q.text + "\n";
      queries.push_back(q);
    }
    llm.script(build_tuple_prompt(question, initial, shots.tuple_shots), tuple_text);
    llm.script(build_question_prompt(tuples, question, shots.question_shots), question_text);

    std::vector<VerificationRecord> records;
    for (int k = 0; k < 3; ++k) {
      const auto& q = queries[static_cast<std::size_t>(k)];
      const bool present = k < 2;
      const auto paras = paraphrases_of(kBareTemplates, objs[static_cast<std::size_t>(k)], opt.paraphrases);
      llm.script(build_paraphrase_prompt(q, opt.paraphrases), render_numbered_list(paras));
      VerificationRecord rec;
      rec.query = q;
      for (std::size_t p = 0; p < paras.size(); ++p) {
        const bool correct = rng.bernoulli(0.85);
        const bool says_yes = present == correct;
        const double prob = 0.6 + 0.35 * rng.uniform();
        mllm.script(paras[p], yes_no(says_yes), prob, ex.image_ref);
        rec.samples.push_back({static_cast<int>(p), says_yes ? Answer::Yes : Answer::No, prob});
      }
      rec.result = select_answer(rec.samples, Estimator::SelfConsistency, Aggregator::Mean);
      records.push_back(std::move(rec));
    }
    const VerificationContext ctx = format_verification_context(records, 0.0);
    std::string refined;
    std::vector<std::string> kept;
    for (const auto& r : records) {
      if (r.result->majority == Answer::Yes) kept.push_back(r.query.source_tuple->argument);
    }
    if (kept.empty()) {
      refined = "The image shows a scene without clearly identifiable objects.";
    } else {
      refined = "There is a " + kept[0];
      for (std::size_t k = 1; k < kept.size(); ++k) refined += " and a " + kept[k];
      refined += ".";
    }
    llm.script(build_refine_prompt(question, initial, ctx), refined);
  }
  fx.mllm_script = mllm.to_json();
  fx.llm_script = llm.to_json();
  fx.config = base_config(opt.paraphrases);
  fx.lexicon = std::move(lexicon);
  return fx;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace

const std::vector<std::string>& fixture_scenarios() {
  static const std::vector<std::string> s{"passthrough_pope", "generative_caption", "yes_biased_model"};
  return s;
}

FixtureSet make_fixture(const FixtureOptions& options) {
  if (options.paraphrases < 1 || options.paraphrases > static_cast<int>(kImageTemplates.size())) {
    throw Error(ErrorCode::ConfigError,
                "fixtures support 1.." + std::to_string(kImageTemplates.size()) + " paraphrases");
  }
  if (options.examples && *options.examples < 1) throw Error(ErrorCode::ConfigError, "examples must be >= 1");
  if (options.scenario == "passthrough_pope") return passthrough_pope(options);
  if (options.scenario == "generative_caption") return generative_caption(options);
  if (options.scenario == "yes_biased_model") return yes_biased(options);
  throw Error(ErrorCode::UnknownScenario, "unknown scenario '" + options.scenario + "'");
}

void write_fixture(const FixtureSet& fx, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_unified(dir / "dataset.jsonl", fx.dataset);
  write_json(dir / "mllm_script.json", fx.mllm_script);
  write_json(dir / "llm_script.json", fx.llm_script);
  write_json(dir / "config.json", fx.config);
  if (fx.lexicon) write_json(dir / "lexicon.json", *fx.lexicon);
}

}  // namespace atomcal
