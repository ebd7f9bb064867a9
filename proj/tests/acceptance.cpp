// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <atomic>
#include <chrono>
#include <functional>
#include <iostream>
#include <sstream>

#include "amoa/accounting.hpp"
#include "amoa/cli.hpp"
#include "amoa/conformance_server.hpp"
#include "amoa/dataset.hpp"
#include "amoa/judge.hpp"
#include "amoa/pipeline.hpp"
#include "amoa/templates.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace {

using namespace amoa;
using namespace amoa::testing;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

const std::filesystem::path kGolden = AMOA_GOLDEN_DIR;

std::size_t occurrences(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = text.find(needle); at != std::string::npos; at = text.find(needle, at + needle.size())) ++n;
  return n;
}

void check_call_law(Outcome& o, const RunTranscript& t, std::size_t n, int depth, AttentionMode mode) {
  const auto expected = closed_form_calls(n, static_cast<std::size_t>(depth), mode);
  std::ostringstream what;
  what << "N=" << n << " L=" << depth << " " << to_string(mode) << ": " << t.call_count() << " calls, expected "
       << expected;
  o.require(t.termination.status == RunStatus::kCompleted && t.call_count() == expected, what.str());
}

void check_stack_laws(Outcome& o, const RunTranscript& t) {
  for (std::size_t i = 0; i < t.layers.size(); ++i) {
    const auto& layer = t.layers[i];
    const int l = static_cast<int>(i) + 1;
    for (const auto& call : layer.calls) {
      if (call.phase == Phase::kSampling) {
        if (l == 1) {
          o.require(!call.system.has_value(), "layer 1 sampling prompt carries a previous output");
        } else {
          const auto& prev = t.layers[i - 1].output->text;
          const auto system = call.system.value_or("");
          o.require(occurrences(system, "Response from model ") == 1 && system.size() >= prev.size() &&
                        system.compare(system.size() - prev.size(), prev.size(), prev) == 0,
                    "layer " + std::to_string(l) + " sampling prompt does not embed exactly y_" +
                        std::to_string(l - 1));
        }
      }
      if (call.phase == Phase::kResidual) {
        const auto prompt = prompt_text(call);
        o.require(occurrences(prompt, "Response of historical round ") == static_cast<std::size_t>(l),
                  "residual prompt at layer " + std::to_string(l) + " does not list " + std::to_string(l) + " rounds");
        for (int k = 1; k < l; ++k) {
          o.require(prompt.find(t.layers[k - 1].output->text) != std::string::npos,
                    "residual prompt at layer " + std::to_string(l) + " lacks y_" + std::to_string(k));
        }
      }
    }
  }
}

Outcome call_count_laws() {
  Outcome o;
  for (const auto mode : {AttentionMode::kPairwise, AttentionMode::kSinglePass}) {
    for (std::size_t n = 2; n <= 6; ++n) {
      for (int depth = 1; depth <= 5; ++depth) {
        Pipeline pipeline(make_config(n, depth, mode), {{"mock", make_mock(1)}});
        check_call_law(o, pipeline.run(QueryContext{{}, "How do tides work?"}), n, depth, mode);
      }
    }
  }
  return o;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "amoa");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome determinism_and_replay() {
  Outcome o;
  TempDir dir("acceptance_replay");
  const std::vector<std::string> base{"run", "--query", "Compare TCP and UDP.", "--layers", "3", "--agents-n", "3",
                                      "--early-stop", "--seed", "21"};
  auto with = [&](std::vector<std::string> extra) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return cli(args);
  };
  o.require(with({"--out", dir.str("a.json")}) == 0, "first run failed");
  o.require(with({"--out", dir.str("b.json")}) == 0, "second run failed");
  o.require(read_text(dir.path() / "a.json") == read_text(dir.path() / "b.json"), "repeated runs differ");
  o.require(with({"--record", dir.str("fixture.json"), "--out", dir.str("rec.json")}) == 0, "recording failed");
  o.require(with({"--replay", dir.str("fixture.json"), "--out", dir.str("rep.json")}) == 0, "replay failed");
  o.require(read_text(dir.path() / "rec.json") == read_text(dir.path() / "rep.json"), "replay differs from recording");
  o.require(read_text(dir.path() / "rec.json") == read_text(dir.path() / "a.json"), "recording changed the run");
  return o;
}

Outcome template_goldens() {
  Outcome o;
  const QueryContext ctx({ChatMessage{ChatRole::kUser, "Hi there"},
                          ChatMessage{ChatRole::kAssistant, "Hello! How can I help?"}},
                         "Explain residual connections.");
  auto golden = [&](const std::string& name, const std::string& rendered) {
    o.require(read_text(kGolden / (name + ".txt")) == rendered, name + " does not match");
  };
  golden("sampling_l1.user", templates::render_sampling(ctx, std::nullopt).user);
  const auto l2 = templates::render_sampling(ctx, std::string("PREVIOUS LAYER OUTPUT"));
  golden("sampling_l2.system", l2.system.value_or(""));
  golden("sampling_l2.user", l2.user);
  golden("cross_pairwise.user", templates::render_cross_pairwise(ctx, "OWN ANSWER", "OTHER ANSWER").user);
  golden("cross_singlepass.user",
         templates::render_cross_singlepass(ctx, "OWN ANSWER", std::vector<std::string>{"PEER ONE", "PEER TWO"}).user);
  golden("self_attention.user", templates::render_self_attention(ctx, "OWN ANSWER").user);

  auto ins = [](const std::string& advisor, const std::string& text) {
    return AttentionInstruction{advisor, "a2", 1, advisor == "a2" ? AttentionKind::kSelf : AttentionKind::kCross, text};
  };
  const std::vector<AttentionInstruction> addressed{ins("a1", "FROM A1"), ins("a2", "FROM A2"), ins("a3", "FROM A3")};
  const auto agg = templates::render_aggregation(ctx, "OWN ANSWER", addressed,
                                                 std::vector<std::string>{"a1", "a2", "a3"});
  golden("aggregation.system", agg.system.value_or(""));
  golden("aggregation.user", agg.user);
  const auto sum = templates::render_summarization(
      ctx, std::vector<std::string>{"REFINED ONE", "REFINED TWO", "REFINED THREE"});
  golden("summarization.system", sum.system.value_or(""));
  golden("summarization.user", sum.user);

  HistoryStack stack;
  stack.entries = {LayerOutput{1, "ROUND ONE", OutputKind::kAttentionSummary},
                   LayerOutput{2, "ROUND TWO", OutputKind::kResidualSynthesis},
                   LayerOutput{3, "ROUND THREE", OutputKind::kAttentionSummary}};
  const auto res = templates::render_residual(ctx, stack, false);
  golden("residual.system", res.system.value_or(""));
  golden("residual.user", res.user);
  const auto es = templates::render_residual(ctx, stack, true);
  golden("residual_es.system", es.system.value_or(""));
  o.require(es.system->find("Attention-MoA should be stopped") != std::string::npos, "stop clause missing");
  return o;
}

Outcome early_stop_semantics() {
  Outcome o;
  // The residual agent's second call is its layer-3 synthesis.
  std::atomic<int> residual_calls{0};
  auto residual = std::make_shared<ScriptedBackend>("scripted", [&](const ChatRequest& r, const std::string& agent) {
    if (residual_calls.fetch_add(1) == 1) return text_reply("**Attention-MoA should be stopped**");
    return text_reply(mock_complete(2, agent, flatten_prompt(r)));
  });
  Pipeline pipeline(make_config(3, 5, AttentionMode::kPairwise, true, "scripted"),
                    {{"mock", make_mock(2)}, {"scripted", residual}});
  const auto t = pipeline.run(QueryContext{{}, "Outline a study plan."});
  o.require(t.termination.status == RunStatus::kStopped && t.termination.stop_layer == 3,
            "run did not stop at layer 3");
  o.require(std::none_of(t.ledger.begin(), t.ledger.end(), [](const UsageRecord& u) { return u.layer > 3; }),
            "ledger has entries past layer 3");
  o.require(t.termination.skipped_layers == std::vector<int>{4, 5}, "layers 4 and 5 not reported as skipped");
  o.require(t.layers.size() >= 2 && t.layers[1].output && t.final_output == t.layers[1].output->text &&
                t.layers[1].output->kind == OutputKind::kResidualSynthesis,
            "final output is not layer 2's synthesis");

  std::vector<DatasetEntry> entries;
  const char* questions[] = {"Define inertia.", "Explain photosynthesis.", "Summarize the French Revolution.",
                             "What is a monad?", "Why do cats purr?", "How do vaccines work?"};
  for (int i = 0; i < 6; ++i) {
    std::string q = questions[i];
    if (i % 3 != 2) q += " <<stop@" + std::to_string(2 + i % 3) + ">>";
    entries.push_back(DatasetEntry{std::to_string(i), q, std::nullopt});
  }
  auto effective = [&](bool es) {
    Pipeline p(make_config(3, 5, AttentionMode::kPairwise, es), {{"mock", make_mock(2)}});
    const auto result = run_dataset(p, entries, 2);
    return summarize_costs(result.transcripts).overall.effective_tokens;
  };
  const auto with_es = effective(true);
  const auto without = effective(false);
  std::ostringstream what;
  what << "dataset effective tokens with early stop " << with_es << " not below " << without;
  o.require(with_es < without, what.str());
  return o;
}

Outcome prefix_cache_accounting() {
  Outcome o;
  for (const auto mode : {AttentionMode::kPairwise, AttentionMode::kSinglePass}) {
    Pipeline pipeline(make_config(3, 3, mode, true), {{"mock", make_mock(5)}});
    const auto t = pipeline.run(QueryContext{{ChatMessage{ChatRole::kUser, "Hello"},
                                              ChatMessage{ChatRole::kAssistant, "Hi!"}},
                                             "Design a caching layer."});
    const auto oracle = brute_force_cached(t, Tokenizer::approx_chars());
    for (std::size_t i = 0; i < t.ledger.size(); ++i) {
      o.require(t.ledger[i].cached_prompt_tokens == oracle[i],
                "call " + std::to_string(i) + " cached tokens differ from the oracle");
    }
    const auto report = summarize_costs(t);
    o.require(report.overall.effective_tokens ==
                  static_cast<double>(report.overall.raw_tokens() - report.overall.cached_prompt_tokens),
              "effective != raw - cached at factor 0");
    for (const auto phase : {Phase::kAttention, Phase::kResidual}) {
      const auto& totals = report.by_phase.at(phase);
      o.require(totals.cached_prompt_tokens > 0 && totals.cached_prompt_tokens < totals.prompt_tokens,
                std::string("no cache hits in ") + to_string(phase));
    }
  }
  return o;
}

Outcome stack_and_input_laws() {
  Outcome o;
  for (const auto mode : {AttentionMode::kPairwise, AttentionMode::kSinglePass}) {
    for (int depth = 1; depth <= 5; ++depth) {
      Pipeline pipeline(make_config(3, depth, mode), {{"mock", make_mock(6)}});
      check_stack_laws(o, pipeline.run(QueryContext{{}, "What is a black hole?"}));
    }
  }
  return o;
}

Outcome wire_conformance() {
  Outcome o;
  ConformanceServer server({});
  server.start();
  auto config = make_config(3, 2);
  std::vector<AgentSpec> agents;
  BackendRegistry backends;
  for (auto agent : config.roster.agents()) {
    agent.backend = "http_" + agent.id;
    backends[agent.backend] = std::make_shared<HttpBackend>(agent.backend, server.base_url(), agent.id, "");
    agents.push_back(agent);
  }
  config.roster = validate_roster(agents);
  Pipeline pipeline(config, backends);
  const auto t = pipeline.run(QueryContext{{}, "Explain DNS resolution."});
  o.require(t.termination.status == RunStatus::kCompleted, "HTTP run failed: " + t.termination.error);
  check_call_law(o, t, 3, 2, AttentionMode::kPairwise);
  check_stack_laws(o, t);
  o.require(server.request_count() == t.call_count(), "server saw a different number of requests");
  for (const auto& body : server.received_bodies()) {
    o.require(ConformanceServer::check_request(body).empty(), "non-conforming request body");
  }
  server.stop();
  return o;
}

Outcome judge_symmetry() {
  Outcome o;
  ScriptedBackend longer("judge", [](const ChatRequest& r, const std::string&) {
    const auto prompt = flatten_prompt(r);
    auto slot = [&](std::string_view open, std::string_view close) {
      const auto from = prompt.find(open) + open.size();
      return prompt.find(close, from) - from;
    };
    const auto a = slot(templates::kJudgeAnswerAOpen, templates::kJudgeAnswerAClose);
    const auto b = slot(templates::kJudgeAnswerBOpen, templates::kJudgeAnswerBClose);
    return text_reply(a > b ? "[[A]]" : a < b ? "[[B]]" : "[[tie]]");
  });
  const AgentSpec judge{"judge", AgentRole::kJudge, "judge", default_gen_params(AgentRole::kJudge)};
  JudgeOptions options;

  std::vector<AnswerEntry> a, b;
  std::int64_t wins = 0, ties = 0, losses = 0;
  std::mt19937 rng(3);
  for (int i = 0; i < 40; ++i) {
    const auto la = rng() % 6, lb = rng() % 6;
    a.push_back(AnswerEntry{std::to_string(i), "q", std::string(1 + la, 'a')});
    b.push_back(AnswerEntry{std::to_string(i), "q", std::string(1 + lb, 'b')});
    (la > lb ? wins : la < lb ? losses : ties) += 1;
  }
  const auto ab = judge_answers(a, b, longer, judge, Tokenizer::approx_chars(), options);
  o.require(ab.wins == wins && ab.ties == ties && ab.losses == losses, "counts differ from the oracle");

  auto hashed = make_mock(8);
  const auto h_ab = judge_answers(a, b, *hashed, judge, Tokenizer::approx_chars(), options);
  const auto h_ba = judge_answers(b, a, *hashed, judge, Tokenizer::approx_chars(), options);
  o.require(h_ab.wins == h_ba.losses && h_ab.losses == h_ba.wins && h_ab.ties == h_ba.ties,
            "swapping file order changed the winners");
  for (std::size_t i = 0; i < h_ab.verdicts.size(); ++i) {
    const auto x = h_ab.verdicts[i].winner, y = h_ba.verdicts[i].winner;
    const bool mirrored = (x == templates::Verdict::kTie && y == templates::Verdict::kTie) ||
                          (x == templates::Verdict::kA && y == templates::Verdict::kB) ||
                          (x == templates::Verdict::kB && y == templates::Verdict::kA);
    o.require(mirrored, "pair " + h_ab.verdicts[i].id + " changed winner after the swap");
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    std::function<Outcome()> check;
    double limit_s;  // 0 means untimed
  };
  const std::vector<Criterion> criteria{
      {1, "call-count laws over N 2..6, L 1..5, both modes", call_count_laws, 60},
      {2, "deterministic runs and byte-identical replay", determinism_and_replay, 10},
      {3, "prompt templates match the golden files", template_goldens, 0},
      {4, "early stop at layer 3 and cheaper dataset with early stop", early_stop_semantics, 0},
      {5, "prefix-cache accounting against the brute-force oracle", prefix_cache_accounting, 0},
      {6, "history stack length and layer input laws", stack_and_input_laws, 0},
      {7, "HTTP backend against the conformance server", wire_conformance, 30},
      {8, "judge harness symmetry", judge_symmetry, 0},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (outcome.pass && c.limit_s > 0 && seconds >= c.limit_s) {
      outcome.pass = false;
      outcome.detail = "took longer than " + std::to_string(static_cast<int>(c.limit_s)) + " s";
    }
    std::ostringstream line;
    line.precision(2);
    line << std::fixed << (outcome.pass ? "PASS" : "FAIL") << " criterion " << c.number << ": " << c.name << " ("
         << seconds << " s)";
    if (!outcome.pass) line << ": " << outcome.detail;
    std::cout << line.str() << std::endl;
    failures += outcome.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
