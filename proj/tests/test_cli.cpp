#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "amoa/cli.hpp"
#include "amoa/transcript.hpp"
#include "support.hpp"

namespace amoa {
namespace {

using namespace amoa::testing;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "amoa");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

TEST(Cli, HelpListsTheSubcommandsAndFlags) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  for (const auto* word : {"run", "dataset", "judge", "report", "sweep"}) {
    EXPECT_NE(r.out.find(word), std::string::npos) << word;
  }
  const auto run_help = cli({"run", "--help"});
  for (const auto* flag : {"--layers", "--attention", "--early-stop", "--agents-n", "--prefix-cache",
                           "--cache-hit-cost", "--seed", "--record", "--replay", "--config"}) {
    EXPECT_NE(run_help.out.find(flag), std::string::npos) << flag;
  }
}

TEST(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"run"}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--query", "q", "--attention", "sideways"}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--query", "q", "--config", "/nonexistent/amoa.toml"}).code, kExitUsage);
}

TEST(Cli, RunIsDeterministicAndPrintsTheAnswer) {
  TempDir dir("cli_run");
  const std::vector<std::string> common{"run", "--query", "What is entropy?", "--layers", "2", "--agents-n", "3",
                                        "--seed", "11"};
  auto a_args = common;
  a_args.insert(a_args.end(), {"--out", dir.str("a.json")});
  auto b_args = common;
  b_args.insert(b_args.end(), {"--out", dir.str("b.json")});
  const auto a = cli(a_args);
  const auto b = cli(b_args);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  ASSERT_EQ(b.code, kExitOk) << b.err;
  EXPECT_EQ(read_text(dir.path() / "a.json"), read_text(dir.path() / "b.json"));
  const auto t = parse_transcript(read_text(dir.path() / "a.json"));
  EXPECT_EQ(t.call_count(), 2u * 16u + 1u);
  EXPECT_EQ(a.out, t.final_output + "\n");
  EXPECT_EQ(t.config.seed, 11u);
}

TEST(Cli, ReplayReproducesARecordedRun) {
  TempDir dir("cli_replay");
  const std::vector<std::string> common{"run", "--query", "Plan a picnic.", "--layers", "3",
                                        "--attention", "singlepass", "--early-stop"};
  auto rec = common;
  rec.insert(rec.end(), {"--record", dir.str("fixture.json"), "--out", dir.str("recorded.json")});
  ASSERT_EQ(cli(rec).code, kExitOk);
  auto rep = common;
  rep.insert(rep.end(), {"--replay", dir.str("fixture.json"), "--out", dir.str("replayed.json")});
  const auto r = cli(rep);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(read_text(dir.path() / "recorded.json"), read_text(dir.path() / "replayed.json"));

  // A different query is not in the fixture.
  auto miss = rep;
  miss[2] = "Plan a party.";
  const auto m = cli(miss);
  EXPECT_EQ(m.code, kExitRunFailure);
  EXPECT_EQ(parse_transcript(read_text(dir.path() / "replayed.json")).termination.status, RunStatus::kFailed);
}

TEST(Cli, EarlyStopFlagsReachTheTranscript) {
  TempDir dir("cli_es");
  const auto r = cli({"run", "--query", "q", "--layers", "5", "--early-stop", "--stop-at-layer", "3", "--out",
                      dir.str("t.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto t = parse_transcript(read_text(dir.path() / "t.json"));
  EXPECT_EQ(t.termination.status, RunStatus::kStopped);
  EXPECT_EQ(t.termination.stop_layer, 3);
  EXPECT_EQ(t.termination.skipped_layers, (std::vector<int>{4, 5}));
}

TEST(Cli, DatasetWithSomeFailuresExitsWithThree) {
  TempDir dir("cli_dataset");
  write_text(dir.path() / "two.jsonl", "{\"id\": \"a\", \"instruction\": \"first\"}\n"
                                       "{\"id\": 2, \"instruction\": \"second\"}\n");
  write_text(dir.path() / "three.jsonl", read_text(dir.path() / "two.jsonl") +
                                             "{\"id\": \"c\", \"instruction\": \"third\"}\n");
  const auto recorded = cli({"dataset", dir.str("two.jsonl"), "--layers", "2", "--out", dir.str("rec"),
                             "--record", dir.str("fixture.json")});
  ASSERT_EQ(recorded.code, kExitOk) << recorded.err;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "rec" / "transcripts" / "2.json"));

  const auto mixed = cli({"dataset", dir.str("three.jsonl"), "--layers", "2", "--out", dir.str("mixed"),
                          "--replay", dir.str("fixture.json")});
  EXPECT_EQ(mixed.code, kExitPartialFailure);
  const auto report = nlohmann::json::parse(read_text(dir.path() / "mixed" / "report.json"));
  EXPECT_EQ(report.at("failed_ids"), nlohmann::json::array({"c"}));
  const auto answers = read_text(dir.path() / "mixed" / "answers.jsonl");
  EXPECT_EQ(std::count(answers.begin(), answers.end(), '\n'), 2);
  EXPECT_EQ(read_text(dir.path() / "rec" / "answers.jsonl"), answers);
}

TEST(Cli, ReportOnAnEmptyDirectorySucceeds) {
  TempDir dir("cli_report_empty");
  const auto r = cli({"report", dir.str()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
}

TEST(Cli, SweepWritesOneTranscriptPerCell) {
  TempDir dir("cli_sweep");
  const auto r = cli({"sweep", "--query", "q", "--agents-n", "2", "3", "--layers", "1", "2", "--attention",
                      "pairwise", "singlepass", "--early-stop", "false", "true", "--out", dir.str()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::size_t count = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path() / "transcripts")) count += e.is_regular_file();
  EXPECT_EQ(count, 16u);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "transcripts" / "n3_l2_singlepass_es.json"));
  const auto depth = read_text(dir.path() / "depth.csv");
  EXPECT_EQ(depth.rfind("attention,agents,layers,early_stop,runs", 0), 0u);

  const auto report = cli({"report", dir.str(), "--out", dir.str("summary")});
  ASSERT_EQ(report.code, kExitOk) << report.err;
  EXPECT_EQ(read_text(dir.path() / "summary" / "depth.csv"), depth);
}

TEST(Cli, JudgeFileSwapPreservesTheOutcomeCounts) {
  TempDir dir("cli_judge");
  std::string a, b;
  for (int i = 0; i < 12; ++i) {
    a += nlohmann::json{{"id", std::to_string(i)}, {"instruction", "q"}, {"output", "alpha " + std::to_string(i)}}.dump() + "\n";
    b += nlohmann::json{{"id", std::to_string(i)}, {"instruction", "q"}, {"output", "beta " + std::to_string(i * 3)}}.dump() + "\n";
  }
  write_text(dir.path() / "a.jsonl", a);
  write_text(dir.path() / "b.jsonl", b);
  const auto ab = cli({"judge", dir.str("a.jsonl"), dir.str("b.jsonl"), "--out", dir.str("v.jsonl")});
  const auto ba = cli({"judge", dir.str("b.jsonl"), dir.str("a.jsonl")});
  ASSERT_EQ(ab.code, kExitOk) << ab.err;
  ASSERT_EQ(ba.code, kExitOk) << ba.err;
  const auto jab = nlohmann::json::parse(ab.out);
  const auto jba = nlohmann::json::parse(ba.out);
  EXPECT_EQ(jab.at("wins"), jba.at("losses"));
  EXPECT_EQ(jab.at("ties"), jba.at("ties"));
  const auto verdicts = read_text(dir.path() / "v.jsonl");
  EXPECT_EQ(std::count(verdicts.begin(), verdicts.end(), '\n'), 12);
}

TEST(Cli, ConfigFileDefinesTheRoster) {
  TempDir dir("cli_config");
  write_text(dir.path() / "exp.toml", R"(seed = 5
layers = 2
attention = "singlepass"

[backends.local]
kind = "mock"
seed = 99

[[agents]]
id = "alpha"
role = "collaborative"
backend = "local"

[[agents]]
id = "beta"
role = "collaborative"
backend = "local"

[[agents]]
id = "writer"
role = "summary"
backend = "local"

[[agents]]
id = "editor"
role = "residual"
backend = "local"
)");
  const auto r = cli({"run", "--config", dir.str("exp.toml"), "--query", "q", "--out", dir.str("t.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto t = parse_transcript(read_text(dir.path() / "t.json"));
  EXPECT_EQ(t.config.collaborator_count(), 2u);
  EXPECT_EQ(t.config.attention, AttentionMode::kSinglePass);
  EXPECT_EQ(t.call_count(), 2u * 9u + 1u);
  EXPECT_EQ(t.config.seed, 5u);
}

}  // namespace
}  // namespace amoa
