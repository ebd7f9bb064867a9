#include "amoa/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "amoa/config.hpp"
#include "amoa/dataset.hpp"
#include "amoa/judge.hpp"
#include "amoa/pipeline.hpp"
#include "amoa/reporting.hpp"

namespace amoa {

using nlohmann::json;

namespace {

struct RunFlags {
  std::string config;
  std::optional<int> layers;
  std::optional<std::string> attention;
  std::optional<bool> early_stop;
  std::optional<bool> prefix_cache;
  std::optional<double> cache_hit_cost;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> tokenizer;
  std::optional<std::size_t> agents_n;
  std::optional<int> stop_at_layer;
  std::optional<double> deadline_s;
  std::optional<double> timeout_s;
  std::optional<int> retries;
  std::optional<int> parallel;
  std::string record;
  std::string replay;
};

void add_run_flags(CLI::App* app, RunFlags& f, bool with_shape) {
  app->add_option("--config", f.config, "Experiment file (backends, agents, defaults); mock roster when omitted")
      ->check(CLI::ExistingFile);
  if (with_shape) {
    app->add_option("--layers", f.layers, "Maximum depth L")->check(CLI::PositiveNumber);
    app->add_option("--attention", f.attention, "Attention mode")
        ->check(CLI::IsMember({"pairwise", "singlepass"}));
    app->add_flag("--early-stop,!--no-early-stop", f.early_stop, "Let the residual agent stop the run early");
    app->add_option("--agents-n", f.agents_n, "Number of collaborative agents")->check(CLI::Range(2, 64));
  }
  app->add_flag("--prefix-cache,!--no-prefix-cache", f.prefix_cache, "Model provider prefix caching");
  app->add_option("--cache-hit-cost", f.cache_hit_cost, "Price of a cached prompt token relative to a fresh one")
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--seed", f.seed, "Run seed (mock backends without their own seed use it)");
  app->add_option("--tokenizer", f.tokenizer, "Token counting rule")
      ->check(CLI::IsMember({"approx_chars", "whitespace"}));
  app->add_option("--stop-at-layer", f.stop_at_layer,
                  "Mock backends answer early-stop prompts with the stop signal from this layer on");
  app->add_option("--deadline", f.deadline_s, "Whole-run wall-clock limit in seconds")
      ->check(CLI::PositiveNumber);
  app->add_option("--timeout", f.timeout_s, "Per-call timeout in seconds")->check(CLI::PositiveNumber);
  app->add_option("--retries", f.retries, "Retries of transient backend failures")->check(CLI::NonNegativeNumber);
  app->add_option("--record", f.record, "Save every backend call to this fixture file");
  app->add_option("--replay", f.replay, "Answer every call from this fixture file")->check(CLI::ExistingFile);
}

RunSettings resolve_settings(const RunFlags& f) {
  RunSettings s;
  if (f.config.empty()) {
    s = mock_settings(f.agents_n.value_or(3), f.seed.value_or(0));
  } else {
    s = load_settings(f.config);
    if (f.agents_n) resize_collaborators(s, *f.agents_n);
  }
  if (f.seed) s.seed = *f.seed;
  if (f.layers) s.layers = *f.layers;
  if (f.attention) s.attention = attention_mode_from_string(*f.attention);
  if (f.early_stop) s.early_stop = *f.early_stop;
  if (f.prefix_cache) s.prefix_cache = *f.prefix_cache;
  if (f.cache_hit_cost) s.cache_hit_cost = *f.cache_hit_cost;
  if (f.tokenizer) s.tokenizer = *f.tokenizer;
  if (f.deadline_s) s.run_deadline_s = *f.deadline_s;
  if (f.timeout_s) s.timeout_s = *f.timeout_s;
  if (f.retries) s.retries = *f.retries;
  if (f.parallel) s.parallel = *f.parallel;
  if (f.stop_at_layer) {
    for (auto& b : s.backends) {
      if (b.kind == BackendSpec::Kind::kMock) b.mock.stop_at_layer = *f.stop_at_layer;
    }
  }
  return s;
}

/// Backends for a run, wrapped for recording or swapped for replay.
struct PreparedBackends {
  BackendRegistry registry;
  std::shared_ptr<FixtureStore> recording;
};

PreparedBackends prepare_backends(const RunSettings& s, const RunFlags& f) {
  PreparedBackends out;
  if (!f.replay.empty()) {
    const auto store = FixtureStore::load(f.replay);
    for (const auto& b : s.backends) {
      out.registry.emplace(b.name, std::make_shared<ReplayBackend>(b.name, store, b.max_in_flight));
    }
    return out;
  }
  out.registry = build_backends(s);
  if (!f.record.empty()) {
    out.recording = std::make_shared<FixtureStore>();
    for (auto& [name, backend] : out.registry) {
      backend = std::make_shared<RecordingBackend>(backend, out.recording);
    }
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw Error(ErrorCode::kWriteFailure, "cannot write '" + path.string() + "'");
}

std::vector<ChatMessage> load_history(const std::string& path) {
  const auto doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) {
    throw Error(ErrorCode::kParse, "'" + path + "' must hold a JSON array of {role, content}");
  }
  try {
    return doc.get<std::vector<ChatMessage>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, "'" + path + "': " + e.what());
  }
}

std::string cost_line(const RunTranscript& t) {
  const auto overall = summarize_costs(t).overall;
  char buf[256];
  std::snprintf(buf, sizeof buf, "status=%s layers=%d calls=%lld raw=%lld cached=%lld effective=%.2f",
                to_string(t.termination.status), t.termination.layers_run,
                static_cast<long long>(overall.calls), static_cast<long long>(overall.raw_tokens()),
                static_cast<long long>(overall.cached_prompt_tokens), overall.effective_tokens);
  return buf;
}

int cmd_run(const RunFlags& f, const std::string& query, const std::string& history_path,
            const std::string& out_path, std::ostream& out, std::ostream& err) {
  const auto settings = resolve_settings(f);
  auto config = pipeline_config(settings);
  auto backends = prepare_backends(settings, f);
  const QueryContext ctx(history_path.empty() ? std::vector<ChatMessage>{} : load_history(history_path), query);

  const Pipeline pipeline(std::move(config), backends.registry);
  const auto transcript = pipeline.run(ctx);
  write_transcript(out_path, transcript);
  if (backends.recording) backends.recording->save(f.record);

  if (transcript.termination.status == RunStatus::kFailed) {
    err << "run failed: " << transcript.termination.error << "\n";
    err << "partial transcript written to " << out_path << "\n";
    err << cost_line(transcript) << "\n";
    return kExitRunFailure;
  }
  out << transcript.final_output << "\n";
  err << cost_line(transcript) << "\n";
  return kExitOk;
}

int cmd_dataset(const RunFlags& f, const std::string& dataset_path, const std::string& out_dir,
                std::ostream& out, std::ostream& err) {
  const auto settings = resolve_settings(f);
  auto config = pipeline_config(settings);
  auto backends = prepare_backends(settings, f);
  const auto entries = load_dataset(dataset_path);
  const Pipeline pipeline(std::move(config), backends.registry);

  const auto result = run_dataset(pipeline, entries, settings.parallel);
  write_dataset_outputs(out_dir, entries, result);
  if (backends.recording) backends.recording->save(f.record);

  const auto report = summarize_costs(result.transcripts);
  out << "entries=" << entries.size() << " failed=" << result.failed_ids.size() << "\n";
  out << stop_histogram_csv(report);
  for (const auto& id : result.failed_ids) err << "entry " << id << " failed\n";
  if (result.failed_ids.empty()) return kExitOk;
  return result.failed_ids.size() == entries.size() && !entries.empty() ? kExitRunFailure : kExitPartialFailure;
}

int cmd_judge(const RunFlags& f, const std::string& a_path, const std::string& b_path,
              const std::string& out_path, const std::string& policy, std::ostream& out) {
  auto settings = resolve_settings(f);
  if (!policy.empty()) {
    for (auto& b : settings.backends) {
      if (b.kind == BackendSpec::Kind::kMock) b.mock.judge = judge_policy_from_string(policy);
    }
  }
  const auto roster = validate_roster(settings.agents);
  const auto* judge = roster.judge();
  if (judge == nullptr) throw Error(ErrorCode::kConfig, "the roster has no judge agent");
  auto backends = prepare_backends(settings, f);
  auto& backend = *backends.registry.at(judge->backend);

  JudgeOptions options;
  options.parallel = settings.parallel;
  options.call.timeout = std::chrono::milliseconds(static_cast<long long>(settings.timeout_s * 1000));
  options.call.retry.max_retries = settings.retries;
  const auto summary = judge_answers(load_answers(a_path), load_answers(b_path), backend, *judge,
                                     Tokenizer::from_name(settings.tokenizer), options);
  if (backends.recording) backends.recording->save(f.record);

  if (!out_path.empty()) {
    std::string lines;
    for (const auto& v : summary.verdicts) lines += verdicts_jsonl_line(v).dump() + "\n";
    write_file(out_path, lines);
  }
  out << judge_summary_json(summary).dump(2) << "\n";
  return kExitOk;
}

int cmd_report(const std::string& dir, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const auto loaded = load_transcript_dir(dir);
  for (const auto& w : loaded.warnings) err << "warning: " << w << "\n";
  const auto report = summarize_costs(loaded.transcripts);
  const auto depth = depth_table_csv(loaded.transcripts);
  const auto cost = cost_report_csv(report);
  const auto stops = stop_histogram_csv(report);
  if (!out_dir.empty()) {
    const std::filesystem::path root(out_dir);
    write_file(root / "depth.csv", depth);
    write_file(root / "cost.csv", cost);
    write_file(root / "stops.csv", stops);
    write_file(root / "report.json", cost_report_json(report).dump(2) + "\n");
  }
  out << depth << "\n" << cost << "\n" << stops;
  return kExitOk;
}

int cmd_sweep(RunFlags f, const std::string& query, const std::vector<std::size_t>& agents,
              const std::vector<int>& layers, const std::vector<std::string>& modes,
              const std::vector<bool>& stops, const std::string& out_dir, std::ostream& out,
              std::ostream& err) {
  std::vector<RunTranscript> all;
  bool failed = false;
  for (const auto n : agents) {
    for (const auto l : layers) {
      for (const auto& mode : modes) {
        for (const bool es : stops) {
          f.agents_n = n;
          f.layers = l;
          f.attention = mode;
          f.early_stop = es;
          const auto settings = resolve_settings(f);
          auto backends = prepare_backends(settings, f);
          const Pipeline pipeline(pipeline_config(settings), backends.registry);
          auto t = pipeline.run(QueryContext({}, query));
          const auto name = "n" + std::to_string(n) + "_l" + std::to_string(l) + "_" + mode +
                            (es ? "_es" : "_noes") + ".json";
          write_transcript((std::filesystem::path(out_dir) / "transcripts" / name).string(), t);
          err << name << ": " << cost_line(t) << "\n";
          failed = failed || t.termination.status == RunStatus::kFailed;
          all.push_back(std::move(t));
        }
      }
    }
  }
  const auto depth = depth_table_csv(all);
  write_file(std::filesystem::path(out_dir) / "depth.csv", depth);
  write_file(std::filesystem::path(out_dir) / "cost.csv", cost_report_csv(summarize_costs(all)));
  out << depth;
  return failed ? kExitPartialFailure : kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Layered multi-agent answer refinement with intra-layer attention and residual synthesis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "amoa 1.0.0");

  RunFlags flags;

  auto* run = app.add_subcommand("run", "Answer one query and write its transcript");
  std::string query, history, transcript_out = "transcript.json";
  add_run_flags(run, flags, true);
  run->add_option("--query", query, "The user query")->required();
  run->add_option("--history", history, "JSON file with prior turns [{role, content}]")->check(CLI::ExistingFile);
  run->add_option("--out", transcript_out, "Transcript path")->capture_default_str();

  auto* dataset = app.add_subcommand("dataset", "Answer every entry of a JSON Lines dataset");
  std::string dataset_path, dataset_out;
  add_run_flags(dataset, flags, true);
  dataset->add_option("dataset", dataset_path, "JSONL with {id, instruction, reference?}")
      ->required()
      ->check(CLI::ExistingFile);
  dataset->add_option("--out", dataset_out, "Output directory")->required();
  dataset->add_option("--parallel", flags.parallel, "Runs in flight at once")->check(CLI::PositiveNumber);

  auto* judge = app.add_subcommand("judge", "Compare two answer files with position-swapped judging");
  std::string a_path, b_path, verdicts_out, policy;
  add_run_flags(judge, flags, false);
  judge->add_option("answers_a", a_path, "JSONL with {id, instruction, output}")->required()->check(CLI::ExistingFile);
  judge->add_option("answers_b", b_path, "JSONL with {id, instruction, output}")->required()->check(CLI::ExistingFile);
  judge->add_option("--out", verdicts_out, "Write per-pair verdicts as JSONL");
  judge->add_option("--judge-policy", policy, "Verdict rule of mock judges")
      ->check(CLI::IsMember({"hash", "longer", "first"}));
  judge->add_option("--parallel", flags.parallel, "Pairs in flight at once")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Summarize a directory of transcripts");
  std::string report_dir, report_out;
  report->add_option("dir", report_dir, "Directory searched recursively for *.json transcripts")->required();
  report->add_option("--out", report_out, "Also write depth.csv, cost.csv, stops.csv, report.json here");

  auto* sweep = app.add_subcommand("sweep", "Run the cartesian product of roster sizes, depths, modes, early stopping");
  std::string sweep_query, sweep_out;
  std::vector<std::size_t> sweep_agents{3};
  std::vector<int> sweep_layers{1, 2, 3, 4, 5};
  std::vector<std::string> sweep_modes{"pairwise"};
  std::vector<bool> sweep_stops{false};
  add_run_flags(sweep, flags, false);
  sweep->add_option("--query", sweep_query, "The user query")->required();
  sweep->add_option("--agents-n", sweep_agents, "Collaborator counts")->capture_default_str()->check(CLI::Range(2, 64));
  sweep->add_option("--layers", sweep_layers, "Depths")->capture_default_str()->check(CLI::PositiveNumber);
  sweep->add_option("--attention", sweep_modes, "Attention modes")->capture_default_str()
      ->check(CLI::IsMember({"pairwise", "singlepass"}));
  sweep->add_option("--early-stop", sweep_stops, "Early-stop settings, e.g. false true")->capture_default_str();
  sweep->add_option("--out", sweep_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) return cmd_run(flags, query, history, transcript_out, out, err);
    if (*dataset) return cmd_dataset(flags, dataset_path, dataset_out, out, err);
    if (*judge) return cmd_judge(flags, a_path, b_path, verdicts_out, policy, out);
    if (*report) return cmd_report(report_dir, report_out, out, err);
    if (*sweep) {
      return cmd_sweep(flags, sweep_query, sweep_agents, sweep_layers, sweep_modes, sweep_stops, sweep_out,
                       out, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::kTimeout:
      case ErrorCode::kTransport:
      case ErrorCode::kRemoteStatus:
      case ErrorCode::kEmptyCompletion:
      case ErrorCode::kMissingFixture:
      case ErrorCode::kWriteFailure:
      case ErrorCode::kDeadlineExceeded:
        return kExitRunFailure;
      default:
        return kExitUsage;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRunFailure;
  }
  return kExitUsage;
}

}  // namespace amoa
