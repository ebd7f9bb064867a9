#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "amoa/templates.hpp"
#include "support.hpp"

namespace amoa {
namespace {

using testing::read_text;
namespace t = templates;

const std::filesystem::path kGolden = AMOA_GOLDEN_DIR;

QueryContext fixture_ctx() {
  return QueryContext({ChatMessage{ChatRole::kUser, "Hi there"},
                       ChatMessage{ChatRole::kAssistant, "Hello! How can I help?"}},
                      "Explain residual connections.");
}

AttentionInstruction ins(const std::string& advisor, const std::string& recipient, const std::string& text) {
  return AttentionInstruction{advisor, recipient, 1,
                              advisor == recipient ? AttentionKind::kSelf : AttentionKind::kCross, text};
}

HistoryStack rounds(std::initializer_list<const char*> texts) {
  HistoryStack stack;
  int layer = 1;
  for (const char* text : texts) {
    stack.entries.push_back(LayerOutput{layer, text,
                                        layer == static_cast<int>(texts.size()) ? OutputKind::kAttentionSummary
                                                                                : OutputKind::kResidualSynthesis});
    ++layer;
  }
  return stack;
}

TEST(GoldenTemplates, SamplingLayerOneHasNoSystemPrompt) {
  const auto p = t::render_sampling(fixture_ctx(), std::nullopt);
  EXPECT_FALSE(p.system.has_value());
  EXPECT_EQ(p.user, read_text(kGolden / "sampling_l1.user.txt"));
}

TEST(GoldenTemplates, SamplingLaterLayersEmbedPreviousOutput) {
  const auto p = t::render_sampling(fixture_ctx(), std::string("PREVIOUS LAYER OUTPUT"));
  ASSERT_TRUE(p.system.has_value());
  EXPECT_EQ(*p.system, read_text(kGolden / "sampling_l2.system.txt"));
  EXPECT_EQ(p.user, read_text(kGolden / "sampling_l2.user.txt"));
}

TEST(GoldenTemplates, CrossPairwise) {
  const auto p = t::render_cross_pairwise(fixture_ctx(), "OWN ANSWER", "OTHER ANSWER");
  EXPECT_FALSE(p.system.has_value());
  EXPECT_EQ(p.user, read_text(kGolden / "cross_pairwise.user.txt"));
}

TEST(GoldenTemplates, CrossSinglePass) {
  const std::vector<std::string> peers{"PEER ONE", "PEER TWO"};
  const auto p = t::render_cross_singlepass(fixture_ctx(), "OWN ANSWER", peers);
  EXPECT_EQ(p.user, read_text(kGolden / "cross_singlepass.user.txt"));
}

TEST(GoldenTemplates, SelfAttention) {
  const auto p = t::render_self_attention(fixture_ctx(), "OWN ANSWER");
  EXPECT_EQ(p.user, read_text(kGolden / "self_attention.user.txt"));
}

TEST(GoldenTemplates, Aggregation) {
  const std::vector<std::string> ids{"a1", "a2", "a3"};
  const std::vector<AttentionInstruction> in{ins("a1", "a2", "FROM A1"), ins("a2", "a2", "FROM A2"),
                                             ins("a3", "a2", "FROM A3")};
  const auto p = t::render_aggregation(fixture_ctx(), "OWN ANSWER", in, ids);
  ASSERT_TRUE(p.system.has_value());
  EXPECT_EQ(*p.system, read_text(kGolden / "aggregation.system.txt"));
  EXPECT_EQ(p.user, read_text(kGolden / "aggregation.user.txt"));
}

TEST(GoldenTemplates, Summarization) {
  const std::vector<std::string> refined{"REFINED ONE", "REFINED TWO", "REFINED THREE"};
  const auto p = t::render_summarization(fixture_ctx(), refined);
  EXPECT_EQ(*p.system, read_text(kGolden / "summarization.system.txt"));
  EXPECT_EQ(p.user, read_text(kGolden / "summarization.user.txt"));
}

TEST(GoldenTemplates, ResidualWithoutEarlyStop) {
  const auto p = t::render_residual(fixture_ctx(), rounds({"ROUND ONE", "ROUND TWO", "ROUND THREE"}), false);
  EXPECT_EQ(*p.system, read_text(kGolden / "residual.system.txt"));
  EXPECT_EQ(p.user, read_text(kGolden / "residual.user.txt"));
}

TEST(GoldenTemplates, ResidualWithEarlyStop) {
  const auto p = t::render_residual(fixture_ctx(), rounds({"ROUND ONE", "ROUND TWO", "ROUND THREE"}), true);
  EXPECT_EQ(*p.system, read_text(kGolden / "residual_es.system.txt"));
}

TEST(Templates, BareQueryWithoutHistory) {
  const QueryContext ctx({}, "Just this.");
  EXPECT_EQ(t::render_sampling(ctx, std::nullopt).user, "Just this.");
  EXPECT_EQ(t::history_and_query(ctx), "Just this.");
  EXPECT_EQ(t::format_history(ctx), "");
}

TEST(Templates, AggregationOrderIsCanonicalForAnyInputPermutation) {
  const std::vector<std::string> ids{"a1", "a2", "a3", "a4"};
  std::vector<AttentionInstruction> in{ins("a1", "a3", "one"), ins("a2", "a3", "two"),
                                       ins("a3", "a3", "three"), ins("a4", "a3", "four")};
  const auto expected = *t::render_aggregation(fixture_ctx(), "own", in, ids).system;
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(in.begin(), in.end(), rng);
    EXPECT_EQ(*t::render_aggregation(fixture_ctx(), "own", in, ids).system, expected);
  }
  // Block k carries the instruction of the k-th roster agent.
  EXPECT_LT(expected.find("model 1:\none"), expected.find("model 2:\ntwo"));
  EXPECT_LT(expected.find("model 3:\nthree"), expected.find("model 4:\nfour"));
}

TEST(Templates, AggregationRejectsIncompleteOrMixedInstructions) {
  const std::vector<std::string> ids{"a1", "a2", "a3"};
  const std::vector<AttentionInstruction> missing{ins("a1", "a2", "x"), ins("a2", "a2", "y")};
  EXPECT_THROW(t::render_aggregation(fixture_ctx(), "own", missing, ids), Error);
  const std::vector<AttentionInstruction> dup{ins("a1", "a2", "x"), ins("a1", "a2", "x"), ins("a2", "a2", "y")};
  EXPECT_THROW(t::render_aggregation(fixture_ctx(), "own", dup, ids), Error);
  const std::vector<AttentionInstruction> mixed{ins("a1", "a2", "x"), ins("a2", "a2", "y"), ins("a3", "a1", "z")};
  EXPECT_THROW(t::render_aggregation(fixture_ctx(), "own", mixed, ids), Error);
}

TEST(Templates, ResidualEnumeratesEveryRoundOnce) {
  for (std::size_t depth = 2; depth <= 6; ++depth) {
    HistoryStack stack;
    for (std::size_t l = 1; l <= depth; ++l) {
      stack.entries.push_back(LayerOutput{static_cast<int>(l), "text-" + std::to_string(l),
                                          OutputKind::kResidualSynthesis});
    }
    const auto system = *t::render_residual(fixture_ctx(), stack, false).system;
    std::size_t labels = 0;
    for (auto pos = system.find(t::kResidualRoundLabel); pos != std::string::npos;
         pos = system.find(t::kResidualRoundLabel, pos + 1)) {
      ++labels;
    }
    EXPECT_EQ(labels, depth);
  }
}

TEST(Templates, ResidualNeedsTwoRounds) {
  EXPECT_THROW(t::render_residual(fixture_ctx(), rounds({"only"}), false), Error);
}

TEST(Templates, ConsecutiveResidualPromptsShareEarlierRounds) {
  const auto a = *t::render_residual(fixture_ctx(), rounds({"R1", "R2"}), false).system;
  auto stack = rounds({"R1", "R2", "R3"});
  const auto b = *t::render_residual(fixture_ctx(), stack, false).system;
  const auto prefix_end = a.find("R2") + 2;
  EXPECT_EQ(a.substr(0, prefix_end), b.substr(0, prefix_end));
}

TEST(ParseSinglePass, ReadsObjectsWithSurroundingProse) {
  const auto map = t::parse_singlepass(
      "Here you go:\n```json\n{\"suggestion_for_model_1\": \"tighten\", \"suggestion_for_model_2\": \"cite\"}\n```");
  ASSERT_EQ(map.size(), 2u);
  EXPECT_EQ(map.at(1), "tighten");
  EXPECT_EQ(map.at(2), "cite");
}

TEST(ParseSinglePass, BracesInsideStringsDoNotConfuseTheScanner) {
  const auto map = t::parse_singlepass(R"({"suggestion_for_model_1": "use {x} and }", "other": 1})");
  EXPECT_EQ(map.at(1), "use {x} and }");
  EXPECT_EQ(map.size(), 1u);
}

TEST(ParseSinglePass, SkipsUnparsableCandidates) {
  const auto map = t::parse_singlepass("{not json} then {\"suggestion_for_model_3\": \"ok\"}");
  EXPECT_EQ(map.at(3), "ok");
}

TEST(ParseSinglePass, MalformedThrows) {
  EXPECT_THROW(t::parse_singlepass("no json here"), Error);
  EXPECT_THROW(t::parse_singlepass("{\"suggestion_for_model_1\": "), Error);
  try {
    t::parse_singlepass("nothing");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformed);
  }
}

TEST(StopSentinel, DetectsBoldPlainAndReflowedForms) {
  EXPECT_TRUE(t::detect_stop_sentinel("**Attention-MoA should be stopped**"));
  EXPECT_TRUE(t::detect_stop_sentinel("attention-moa should be stopped"));
  EXPECT_TRUE(t::detect_stop_sentinel("ATTENTION-MOA   SHOULD\nBE STOPPED."));
  EXPECT_TRUE(t::detect_stop_sentinel("Nothing improved.\n\n**Attention-MoA should be stopped**"));
  EXPECT_FALSE(t::detect_stop_sentinel("Here is the synthesized answer…"));
  EXPECT_FALSE(t::detect_stop_sentinel("Attention-MoA should be continued"));
  EXPECT_FALSE(t::detect_stop_sentinel(""));
}

TEST(StopSentinel, PropertyAnyWhitespaceAndBoldWrappingIsDetected) {
  const std::vector<std::string> words{"Attention-MoA", "should", "be", "stopped"};
  const std::vector<std::string> gaps{" ", "  ", "\n", "\t", " \n "};
  std::mt19937 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::string text = (rng() % 2) ? "**" : "";
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i > 0) text += gaps[rng() % gaps.size()];
      std::string w = words[i];
      for (auto& c : w) {
        if (rng() % 2) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      }
      text += w;
    }
    text += (rng() % 2) ? "**" : "";
    EXPECT_TRUE(t::detect_stop_sentinel(text)) << text;
  }
}

TEST(Judge, TemplateCarriesBothAnswersInOrder) {
  const auto p = t::render_judge("Say hi", "first answer", "second answer");
  ASSERT_TRUE(p.system.has_value());
  EXPECT_EQ(p.user,
            "[Instruction]\nSay hi\n\n[Answer A]\nfirst answer\n[End of Answer A]\n\n[Answer B]\nsecond "
            "answer\n[End of Answer B]");
}

TEST(Judge, VerdictIsTheLastMarker) {
  EXPECT_EQ(t::parse_verdict("[[A]]"), t::Verdict::kA);
  EXPECT_EQ(t::parse_verdict("Maybe [[A]], but finally [[b]]"), t::Verdict::kB);
  EXPECT_EQ(t::parse_verdict("It is a [[TIE]]"), t::Verdict::kTie);
  EXPECT_FALSE(t::parse_verdict("no verdict").has_value());
}

}  // namespace
}  // namespace amoa
