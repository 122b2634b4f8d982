#include "atomcal/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_set>

#include "atomcal/error.hpp"
#include "atomcal/reformulation.hpp"
#include "atomcal/refinement.hpp"
#include "atomcal/text.hpp"

namespace atomcal {

namespace {

bool is_fatal(const Error& e) {
  return e.code() == ErrorCode::CacheMissInStrictReplay || e.code() == ErrorCode::UnknownBackend;
}

std::string with_id(std::string_view flag, int id) { return std::string(flag) + ":" + std::to_string(id); }

class ExampleRun {
public:
  ExampleRun(const DatasetExample& ex, const PipelineConfig& cfg, Gateway& gw, const Exemplars& shots)
      : ex_(ex), cfg_(cfg), gw_(gw), shots_(shots) {
    a_.example_id = ex.example_id;
    a_.question = ex.question;
    a_.image_ref = ex.image_ref;
  }

  RunArtifact run() {
    const std::string core(strip_answer_instruction(ex_.question));
    a_.passthrough = classify_passthrough(core);
    if (!initial_answer() && !a_.passthrough) return finish_failed();

    if (a_.passthrough) {
      a_.queries.push_back(AtomicQuery{1, core, std::nullopt, true});
    } else if (!generate_queries()) {
      return finish_with_initial();
    }

    std::optional<Answer> original;
    if (a_.passthrough && a_.initial_answer) {
      const Answer init = normalize_answer(*a_.initial_answer);
      if (init != Answer::Unparseable) original = init;
    }
    for (const auto& q : a_.queries) a_.records.push_back(verify(q, original));

    return a_.passthrough ? finish_passthrough(original) : finish_generative();
  }

private:
  ModelResponse call(const ModelRequest& r) {
    ++a_.gateway_calls;
    ModelResponse resp = gw_.query(r);
    a_.latency_ms += resp.latency_ms;
    return resp;
  }

  ModelRequest mllm(std::string prompt, int max_tokens, bool want_probabilities) const {
    ModelRequest r;
    r.backend_id = cfg_.mllm_backend;
    r.model_name = cfg_.mllm_model;
    r.prompt = std::move(prompt);
    r.image_ref = ex_.image_ref;
    r.temperature = cfg_.mllm_temperature;
    r.max_tokens = max_tokens;
    r.seed = cfg_.seed;
    r.want_probabilities = want_probabilities;
    return r;
  }

  std::string llm(const std::string& prompt) {
    ModelRequest r;
    r.backend_id = cfg_.llm_backend;
    r.model_name = cfg_.llm_model;
    r.prompt = prompt;
    r.temperature = cfg_.llm_temperature;
    r.max_tokens = cfg_.llm_max_tokens;
    r.seed = cfg_.seed;
    return call(r).text;
  }

  void flag(std::string f) { a_.flags.push_back(std::move(f)); }

  bool initial_answer() {
    if (cfg_.use_precomputed_initial && ex_.initial_answer) {
      a_.initial_answer = *ex_.initial_answer;
      flag(std::string(flags::kPrecomputedInitial));
      return true;
    }
    try {
      a_.initial_answer = call(mllm(ex_.question, cfg_.mllm_max_tokens, false)).text;
      return true;
    } catch (const Error& e) {
      if (is_fatal(e)) throw;
      flag(std::string(flags::kInitialAnswerFailed));
      a_.error = e.what();
      return false;
    }
  }

  bool generate_queries() {
    try {
      const std::string tuple_out = llm(build_tuple_prompt(ex_.question, *a_.initial_answer, shots_.tuple_shots));
      TupleParse tp = parse_tuples_lenient(tuple_out);
      if (!tp.diagnostics.empty()) flag(std::string(flags::kTupleLinesSkipped));
      a_.tuples = std::move(tp.tuples);
      if (a_.tuples.empty()) {
        flag(std::string(flags::kNoTuples));
        return false;
      }

      const std::string question_prompt = build_question_prompt(a_.tuples, ex_.question, shots_.question_shots);
      QuestionParse qp = parse_questions_lenient(llm(question_prompt));
      if (!qp.diagnostics.empty()) flag(std::string(flags::kQuestionLinesSkipped));
      std::vector<AtomicQuery> found = std::move(qp.accepted);
      if (!qp.rejected.empty()) {
        flag(std::string(flags::kQuestionsRepaired));
        QuestionParse repaired = parse_questions_lenient(llm(build_repair_prompt(question_prompt, qp.rejected)));
        if (!repaired.rejected.empty() || !repaired.diagnostics.empty()) flag(std::string(flags::kQuestionsDropped));
        for (auto& q : repaired.accepted) found.push_back(std::move(q));
      }

      std::set<std::string> seen;
      for (auto& q : found) {
        if (!seen.insert(q.text).second) continue;
        for (const auto& t : a_.tuples) {
          if (t.id == q.id) q.source_tuple = t;
        }
        q.id = static_cast<int>(a_.queries.size()) + 1;
        a_.queries.push_back(std::move(q));
      }
    } catch (const Error& e) {
      if (is_fatal(e)) throw;
      flag(std::string(flags::kQueryGenerationFailed));
      a_.queries.clear();
      return false;
    }
    if (a_.queries.empty()) {
      flag(std::string(flags::kNoAtomicQueries));
      return false;
    }
    return true;
  }

  std::vector<std::string> paraphrases_for(const AtomicQuery& q) {
    ParaphraseParse parsed;
    try {
      parsed = parse_paraphrases_lenient(llm(build_paraphrase_prompt(q, cfg_.n_paraphrases)), cfg_.n_paraphrases);
    } catch (const Error& e) {
      if (is_fatal(e)) throw;
      return {};
    }
    ParaphraseSet set{q, parsed.paraphrases, cfg_.n_paraphrases};
    std::set<std::string> bad;
    for (const auto& v : validate_paraphrase_set(set)) {
      if (v.rule != ParaphraseRule::Duplicate) bad.insert(v.paraphrase);
    }
    std::vector<std::string> kept;
    std::set<std::string> seen;
    for (const auto& p : parsed.paraphrases) {
      if (bad.contains(p) || !seen.insert(text::normalize_for_compare(p)).second) continue;
      kept.push_back(p);
    }
    return kept;
  }

  VerificationRecord verify(const AtomicQuery& q, std::optional<Answer> original) {
    VerificationRecord rec;
    rec.query = q;
    std::vector<std::string> asked = paraphrases_for(q);
    if (asked.empty()) {
      flag(with_id(flags::kParaphraseFailed, q.id));
      return rec;
    }
    if (static_cast<int>(asked.size()) < cfg_.n_paraphrases) flag(with_id(flags::kParaphraseShortfall, q.id));
    if (cfg_.include_original) asked.insert(asked.begin(), q.text);
    rec.paraphrases = asked;

    const bool gray_box = cfg_.estimator == Estimator::SelfConfidence;
    bool answer_failed = false;
    bool missing_probs = false;
    for (std::size_t i = 0; i < asked.size(); ++i) {
      AnswerSample s;
      s.question_index = static_cast<int>(i);
      std::string raw;
      try {
        const ModelResponse resp =
            call(mllm(text::replace_all(cfg_.answer_template, "{question}", asked[i]), cfg_.answer_max_tokens, gray_box));
        raw = resp.text;
        s.answer = normalize_answer(raw);
        if (gray_box && s.answer != Answer::Unparseable) {
          try {
            s.probability = extract_yes_no_probability(resp, s.answer);
          } catch (const Error&) {
            missing_probs = true;
            s.answer = Answer::Unparseable;
          }
        }
      } catch (const Error& e) {
        if (is_fatal(e)) throw;
        answer_failed = true;
        s.answer = Answer::Unparseable;
      }
      rec.raw_answers.push_back(std::move(raw));
      rec.samples.push_back(s);
    }
    if (answer_failed) flag(with_id(flags::kAnswerFailed, q.id));
    if (missing_probs) flag(with_id(flags::kMissingProbabilities, q.id));
    try {
      rec.result = select_answer(rec.samples, cfg_.estimator, cfg_.aggregator, original);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoParseableSamples && e.code() != ErrorCode::EmptySampleSet) throw;
      flag(with_id(flags::kNoParseableSamples, q.id));
    }
    return rec;
  }

  RunArtifact finish_failed() { return std::move(a_); }

  RunArtifact finish_with_initial() {
    a_.final_answer = a_.initial_answer;
    return std::move(a_);
  }

  RunArtifact finish_passthrough(std::optional<Answer> original) {
    const auto& rec = a_.records.front();
    a_.context = format_verification_context(a_.records, 0.0);
    if (rec.result) {
      a_.final_answer = std::string(to_string(rec.result->majority));
    } else if (original) {
      flag(std::string(flags::kFallbackInitial));
      a_.final_answer = std::string(to_string(*original));
    } else {
      a_.error = "no calibrated answer and no usable initial answer";
    }
    if (a_.final_answer) a_.error.reset();
    return std::move(a_);
  }

  RunArtifact finish_generative() {
    a_.context = format_verification_context(a_.records, cfg_.context_threshold);
    if (a_.context.empty()) flag(std::string(flags::kEmptyContext));
    try {
      const RefineOutcome out = refine(ex_.question, *a_.initial_answer, a_.context, a_.queries,
                                       [this](const std::string& prompt) { return llm(prompt); });
      if (out.empty_refinement) flag(std::string(flags::kEmptyRefinement));
      a_.final_answer = out.text;
    } catch (const Error& e) {
      if (is_fatal(e)) throw;
      flag(std::string(flags::kRefineFailed));
      a_.final_answer = a_.initial_answer;
    }
    return std::move(a_);
  }

  const DatasetExample& ex_;
  const PipelineConfig& cfg_;
  Gateway& gw_;
  const Exemplars& shots_;
  RunArtifact a_;
};

}  // namespace

RunArtifact run_example(const DatasetExample& example, const PipelineConfig& config, Gateway& gateway,
                        const Exemplars& exemplars) {
  config.validate();
  return ExampleRun(example, config, gateway, exemplars).run();
}

RunSummary run_dataset(const std::vector<DatasetExample>& dataset, const PipelineConfig& config, Gateway& gateway,
                       const std::filesystem::path& out, const RunOptions& options) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Exemplars& shots = options.exemplars ? *options.exemplars : Exemplars::defaults();
  RunSummary summary;
  summary.examples = static_cast<long>(dataset.size());

  std::unordered_set<std::string> done;
  std::error_code ec;
  if (options.resume && std::filesystem::exists(out, ec)) {
    ArtifactFile existing = read_artifacts(out);
    if (existing.torn_tail) {
      std::filesystem::resize_file(out, existing.valid_bytes);
      summary.torn_tail_dropped = true;
    }
    for (const auto& a : existing.artifacts) done.insert(a.example_id);
  }

  std::vector<const DatasetExample*> todo;
  for (const auto& ex : dataset) {
    if (done.contains(ex.example_id)) {
      ++summary.skipped;
    } else {
      todo.push_back(&ex);
    }
  }

  std::ofstream sink(out, std::ios::binary | (options.resume ? std::ios::app : std::ios::trunc));
  if (!sink) throw Error(ErrorCode::IoError, "cannot write " + out.string());

  std::vector<std::optional<RunArtifact>> slots(todo.size());
  std::size_t write_pos = 0;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr fatal;

  // Completed artifacts are written as soon as every earlier one is.
  auto publish = [&](std::size_t idx, RunArtifact artifact) {
    std::lock_guard lock(mu);
    slots[idx] = std::move(artifact);
    while (write_pos < slots.size() && slots[write_pos]) {
      RunArtifact& a = *slots[write_pos];
      sink << serialize_artifact(a) + "\n";
      sink.flush();
      if (!sink) throw Error(ErrorCode::IoError, "write failed: " + out.string());
      ++summary.executed;
      summary.gateway_calls += static_cast<std::uint64_t>(a.gateway_calls);
      if (a.failed()) summary.failures.push_back({a.example_id, a.error.value_or("no final answer")});
      if (options.on_artifact) options.on_artifact(a);
      slots[write_pos].reset();
      ++write_pos;
    }
  };

  auto worker = [&] {
    while (!stop) {
      const std::size_t idx = next++;
      if (idx >= todo.size()) return;
      try {
        RunArtifact a;
        try {
          a = run_example(*todo[idx], config, gateway, shots);
        } catch (const Error& e) {
          if (is_fatal(e)) throw;
          a.example_id = todo[idx]->example_id;
          a.question = todo[idx]->question;
          a.image_ref = todo[idx]->image_ref;
          a.error = e.what();
        }
        publish(idx, std::move(a));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!fatal) fatal = std::current_exception();
        stop = true;
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(config.parallelism, static_cast<int>(todo.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  summary.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (fatal) std::rethrow_exception(fatal);
  return summary;
}

}  // namespace atomcal
