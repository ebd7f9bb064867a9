#include <gtest/gtest.h>

#include "amoa/pipeline.hpp"
#include "amoa/transcript.hpp"
#include "support.hpp"

namespace amoa {
namespace {

using namespace amoa::testing;

RunTranscript sample_run(AttentionMode mode, bool es) {
  MockOptions options;
  options.stop_at_layer = es ? 2 : 0;
  const Pipeline pipeline(make_config(3, 3, mode, es), {{"mock", make_mock(4, options)}});
  return pipeline.run(QueryContext({ChatMessage{ChatRole::kUser, "earlier"}, ChatMessage{ChatRole::kAssistant, "reply"}},
                                   "Why is the sky blue?"));
}

TEST(Transcript, SerializationRoundTripsExactly) {
  for (const auto mode : {AttentionMode::kPairwise, AttentionMode::kSinglePass}) {
    for (const bool es : {false, true}) {
      const auto t = sample_run(mode, es);
      const auto text = serialize_transcript(t);
      const auto back = parse_transcript(text);
      EXPECT_EQ(back, t);
      EXPECT_EQ(serialize_transcript(back), text);
    }
  }
}

TEST(Transcript, CarriesSchemaVersionAndConfigSnapshot) {
  const auto t = sample_run(AttentionMode::kPairwise, false);
  const auto doc = nlohmann::json::parse(serialize_transcript(t));
  EXPECT_EQ(doc.at("schema_version"), kTranscriptSchemaVersion);
  EXPECT_EQ(doc.at("config").at("max_depth"), 3);
  EXPECT_EQ(doc.at("config").at("attention"), "pairwise");
  EXPECT_EQ(doc.at("config").at("roster").size(), 5u);
  EXPECT_EQ(t.config.collaborator_count(), 3u);
}

TEST(Transcript, RejectsGarbageAndUnknownVersions) {
  EXPECT_THROW(parse_transcript("not json"), Error);
  EXPECT_THROW(parse_transcript("{}"), Error);
  auto doc = nlohmann::json::parse(serialize_transcript(sample_run(AttentionMode::kPairwise, false)));
  doc["schema_version"] = 999;
  EXPECT_THROW(parse_transcript(doc.dump()), Error);
}

TEST(Transcript, WriteCreatesParentDirectories) {
  TempDir dir("transcript");
  const auto t = sample_run(AttentionMode::kSinglePass, false);
  const auto path = dir.str("nested/deeper/run.json");
  write_transcript(path, t);
  EXPECT_EQ(read_transcript(path), t);
  EXPECT_EQ(read_text(path), serialize_transcript(t));
}

TEST(Transcript, EveryCallAppearsOnceInLedgerAndOnceInALayer) {
  const auto t = sample_run(AttentionMode::kPairwise, false);
  std::vector<int> seen(t.ledger.size(), 0);
  for (const auto& layer : t.layers) {
    for (const auto& call : layer.calls) {
      ASSERT_LT(call.call_id, seen.size());
      ++seen[call.call_id];
      const auto& usage = t.ledger[call.call_id];
      EXPECT_EQ(usage.layer, layer.layer);
      EXPECT_EQ(usage.phase, call.phase);
      EXPECT_EQ(usage.agent_id, call.agent_id);
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    EXPECT_EQ(seen[i], 1) << "call " << i;
    EXPECT_EQ(t.ledger[i].call_id, i);
  }
}

}  // namespace
}  // namespace amoa
