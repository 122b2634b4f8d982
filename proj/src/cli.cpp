#include "atomcal/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "atomcal/artifact.hpp"
#include "atomcal/config.hpp"
#include "atomcal/dataset.hpp"
#include "atomcal/error.hpp"
#include "atomcal/fixtures.hpp"
#include "atomcal/gateway.hpp"
#include "atomcal/pipeline.hpp"
#include "atomcal/report.hpp"
#include "atomcal/text.hpp"

namespace atomcal::cli {

using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_json_file(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path);
  f << j.dump(2) << '\n';
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path);
}

DatasetFormat parse_format(const std::string& s) {
  auto f = dataset_format_from_string(s);
  if (!f) throw UsageError("unknown dataset format '" + s + "'");
  return *f;
}

struct RunArgs {
  std::string config, dataset, format = "auto", out, estimator, aggregator, cache_mode;
  std::optional<int> paraphrases, parallelism;
  bool resume = false;
};

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  Config cfg = load_config(a.config);
  PipelineConfig& p = cfg.pipeline;
  if (!a.estimator.empty()) p.estimator = *estimator_from_string(a.estimator);
  if (!a.aggregator.empty()) p.aggregator = *aggregator_from_string(a.aggregator);
  if (!a.cache_mode.empty()) p.cache_mode = *cache_mode_from_string(a.cache_mode);
  if (a.paraphrases) p.n_paraphrases = *a.paraphrases;
  if (a.parallelism) p.parallelism = *a.parallelism;
  p.validate();
  if (p.cache_mode != CacheMode::Off && !cfg.cache_path) {
    throw Error(ErrorCode::ConfigError, "cache mode " + std::string(to_string(p.cache_mode)) + " needs cache_path in the config");
  }

  LoadOptions lo;
  lo.image_root = cfg.image_dir;
  const auto dataset = load_dataset(a.dataset, parse_format(a.format), lo);
  const Exemplars shots = load_exemplars(cfg);
  auto gateway = make_gateway(cfg);

  RunOptions ro;
  ro.resume = a.resume;
  ro.exemplars = &shots;
  const RunSummary s = run_dataset(dataset, p, *gateway, a.out, ro);
  if (s.torn_tail_dropped) err << "dropped a torn final line from " << a.out << "\n";
  json failures = json::array();
  for (const auto& f : s.failures) failures.push_back(json{{"example_id", f.example_id}, {"error", f.error}});
  for (const auto& f : s.failures) err << "example " << f.example_id << " failed: " << f.error << "\n";
  out << json{{"examples", s.examples},
              {"executed", s.executed},
              {"skipped", s.skipped},
              {"failures", std::move(failures)},
              {"gateway_calls", s.gateway_calls},
              {"wall_time", s.wall_time_s}}
             .dump(2)
      << "\n";
  return kExitOk;
}

std::vector<RunArtifact> load_artifacts(const std::string& path, std::ostream& err) {
  ArtifactFile f = read_artifacts(path);
  if (f.torn_tail) err << "ignoring a torn final line in " << path << "\n";
  return std::move(f.artifacts);
}

struct EvalArgs {
  std::string artifacts, dataset, format = "auto", metrics = "pope,bias", lexicon, out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  std::set<std::string> families;
  for (std::string part : text::split_lines(text::replace_all(a.metrics, ",", "\n"))) {
    part = std::string(text::trim(part));
    if (part.empty()) continue;
    if (!metric_families().contains(part)) throw UsageError("unknown metric family '" + part + "'");
    families.insert(part);
  }
  if (families.empty()) throw UsageError("--metrics lists no metric family");
  if (families.contains("amber") && a.lexicon.empty()) throw UsageError("amber metrics need --lexicon");
  std::optional<Lexicon> lexicon;
  if (!a.lexicon.empty()) lexicon = Lexicon::from_file(a.lexicon);

  const auto artifacts = load_artifacts(a.artifacts, err);
  const auto dataset = load_dataset(a.dataset, parse_format(a.format));
  const json report = eval_report(artifacts, dataset, families, lexicon ? &*lexicon : nullptr);
  if (a.out.empty()) {
    out << report.dump(2) << "\n";
  } else {
    write_json_file(a.out, report);
    out << eval_table(report);
  }
  return kExitOk;
}

struct StatsArgs {
  std::string artifacts, dataset, format = "auto", out;
};

int cmd_stats(const StatsArgs& a, std::ostream& out, std::ostream& err) {
  const auto artifacts = load_artifacts(a.artifacts, err);
  const auto dataset = load_dataset(a.dataset, parse_format(a.format));
  const json report = stats_report(artifacts, dataset);
  if (a.out.empty()) {
    out << report.dump(2) << "\n";
  } else {
    write_json_file(a.out, report);
    const auto& v = report["variance"];
    out << "mean variance (correct)    " << v["mean_var_correct"].get<double>() << "\n"
        << "mean variance (incorrect)  " << v["mean_var_incorrect"].get<double>() << "\n";
    for (const char* t : {"welch", "mwu", "pbc"}) {
      if (v[t].is_null()) {
        out << t << ": n/a\n";
      } else {
        out << t << ": statistic " << v[t]["statistic"].get<double>() << ", p " << v[t]["p_value"].get<double>() << "\n";
      }
    }
  }
  return kExitOk;
}

int cmd_cache(const std::string& op, const std::string& path, std::ostream& out) {
  if (op == "compact") {
    ReplayCache cache(path);
    const std::size_t dropped = cache.compact();
    out << json{{"path", path}, {"records", cache.size()}, {"dropped", dropped}}.dump(2) << "\n";
    return kExitOk;
  }
  std::size_t skipped = 0;
  const auto records = ReplayCache::read_records(path, &skipped);
  std::set<std::string> keys;
  long mismatched = 0;
  for (const auto& r : records) {
    keys.insert(r.key.digest);
    if (cache_key(r.request).digest != r.key.digest) ++mismatched;
  }
  const json summary{{"path", path},
                     {"records", records.size()},
                     {"unique_keys", keys.size()},
                     {"duplicates", records.size() - keys.size()},
                     {"skipped_lines", skipped},
                     {"key_mismatches", mismatched}};
  out << summary.dump(2) << "\n";
  if (op == "verify" && (mismatched > 0 || skipped > 0)) {
    throw Error(ErrorCode::SchemaError, std::to_string(mismatched) + " records with a wrong key, " +
                                            std::to_string(skipped) + " unreadable lines");
  }
  return kExitOk;
}

struct FixtureArgs {
  std::string scenario, out;
  std::uint64_t seed = 7;
  std::optional<int> examples;
  double bias = 0.2;
  int paraphrases = 10;
};

int cmd_fixtures(const FixtureArgs& a, std::ostream& out) {
  FixtureOptions o;
  o.scenario = a.scenario;
  o.seed = a.seed;
  o.examples = a.examples;
  o.bias = a.bias;
  o.paraphrases = a.paraphrases;
  const FixtureSet fx = make_fixture(o);
  write_fixture(fx, a.out);
  out << json{{"scenario", a.scenario}, {"out", a.out}, {"examples", fx.dataset.size()}}.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Atomic-query confidence calibration for multimodal QA", "atomcal"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  const std::vector<std::string> estimators{"self_consistency", "self_confidence"};
  const std::vector<std::string> aggregators{"mean", "max"};
  const std::vector<std::string> cache_modes{"record", "replay_strict", "off"};
  const std::vector<std::string> formats{"auto", "unified", "pope", "mme", "hallusion", "amber"};

  RunArgs ra;
  auto* run_cmd = app.add_subcommand("run", "Run the pipeline over a dataset");
  run_cmd->add_option("--config", ra.config, "Config JSON")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--dataset", ra.dataset, "Dataset file")->required();
  run_cmd->add_option("--format", ra.format, "Dataset format")->check(CLI::IsMember(formats));
  run_cmd->add_option("--out", ra.out, "Artifact JSONL output")->required();
  run_cmd->add_option("--estimator", ra.estimator)->check(CLI::IsMember(estimators));
  run_cmd->add_option("--aggregator", ra.aggregator)->check(CLI::IsMember(aggregators));
  run_cmd->add_option("--paraphrases", ra.paraphrases)->check(CLI::PositiveNumber);
  run_cmd->add_option("--parallelism", ra.parallelism)->check(CLI::PositiveNumber);
  run_cmd->add_option("--cache-mode", ra.cache_mode)->check(CLI::IsMember(cache_modes));
  run_cmd->add_flag("--resume", ra.resume, "Skip examples already in --out");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Score artifacts against a dataset");
  eval_cmd->add_option("--artifacts", ea.artifacts)->required();
  eval_cmd->add_option("--dataset", ea.dataset)->required();
  eval_cmd->add_option("--format", ea.format)->check(CLI::IsMember(formats));
  eval_cmd->add_option("--metrics", ea.metrics, "Comma-separated: pope,mme,hallusion,amber,bias");
  eval_cmd->add_option("--lexicon", ea.lexicon, "Object lexicon JSON (amber)");
  eval_cmd->add_option("--out", ea.out, "Report JSON; without it the report goes to stdout");

  StatsArgs sa;
  auto* stats_cmd = app.add_subcommand("stats", "Variance and yes-bias analysis");
  stats_cmd->add_option("--artifacts", sa.artifacts)->required();
  stats_cmd->add_option("--dataset", sa.dataset)->required();
  stats_cmd->add_option("--format", sa.format)->check(CLI::IsMember(formats));
  stats_cmd->add_option("--out", sa.out);

  std::string cache_op, cache_path;
  auto* cache_cmd = app.add_subcommand("cache", "Inspect or maintain a replay cache");
  cache_cmd->add_option("operation", cache_op, "stats | verify | compact")
      ->required()
      ->check(CLI::IsMember({"stats", "verify", "compact"}));
  cache_cmd->add_option("--path", cache_path, "Cache JSONL file")->required()->check(CLI::ExistingFile);

  FixtureArgs fa;
  auto* fx_cmd = app.add_subcommand("fixtures", "Write a mock-backend fixture");
  fx_cmd->add_option("--scenario", fa.scenario)->required()->check(CLI::IsMember(fixture_scenarios()));
  fx_cmd->add_option("--seed", fa.seed);
  fx_cmd->add_option("--out", fa.out, "Output directory")->required();
  fx_cmd->add_option("--examples", fa.examples)->check(CLI::PositiveNumber);
  fx_cmd->add_option("--bias", fa.bias, "yes_biased_model: extra Yes rate of direct answers")->check(CLI::Range(0.0, 0.5));
  fx_cmd->add_option("--paraphrases", fa.paraphrases)->check(CLI::Range(1, 12));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands()) failing = sub;
    err << failing->help();
    return kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(ra, out, err);
    if (*eval_cmd) return cmd_eval(ea, out, err);
    if (*stats_cmd) return cmd_stats(sa, out, err);
    if (*cache_cmd) return cmd_cache(cache_op, cache_path, out);
    if (*fx_cmd) return cmd_fixtures(fa, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}

int main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace atomcal::cli
