#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amoa/model.hpp"

namespace amoa {

inline constexpr int kTranscriptSchemaVersion = 1;

/// One backend call: the exact request that went out and the completion that
/// came back. Usage lives in the ledger under the same call_id.
struct CallRecord {
  std::size_t call_id = 0;
  Phase phase = Phase::kSampling;
  int layer = 0;
  std::string agent_id;
  std::string backend;
  /// What the call was about beyond phase/agent: the recipient of a pairwise
  /// critique, "self", "peers", or "reask".
  std::string target;
  std::optional<std::string> system;
  std::vector<ChatMessage> messages;
  std::string completion;
  std::optional<TokenUsage> reported_usage;
  int attempts = 1;

  bool operator==(const CallRecord&) const = default;
};

struct ResidualTrace {
  std::string raw_completion;
  bool stopped = false;
  std::size_t rounds = 0;  // stack length presented to synthesis

  bool operator==(const ResidualTrace&) const = default;
};

struct LayerTrace {
  int layer = 1;
  /// y_{l-1} as embedded in this layer's sampling prompts; absent at layer 1.
  std::optional<std::string> layer_input;
  std::vector<AgentResponse> initial;
  std::vector<AttentionInstruction> instructions;
  std::vector<AgentResponse> refined;
  std::optional<std::string> summary;
  std::optional<ResidualTrace> residual;
  std::optional<LayerOutput> output;
  std::vector<CallRecord> calls;

  bool operator==(const LayerTrace&) const = default;
};

struct ConfigSnapshot {
  std::vector<AgentSpec> roster;
  int max_depth = 1;
  AttentionMode attention = AttentionMode::kPairwise;
  bool early_stop = false;
  bool prefix_cache = true;
  double cache_hit_cost = 0.0;
  std::string tokenizer = "approx_chars";
  std::uint64_t seed = 0;

  std::size_t collaborator_count() const;
  bool operator==(const ConfigSnapshot&) const = default;
};

enum class RunStatus { kCompleted, kStopped, kFailed };

const char* to_string(RunStatus status);
RunStatus run_status_from_string(const std::string& s);

struct Termination {
  RunStatus status = RunStatus::kCompleted;
  int layers_run = 0;
  /// Layer whose residual agent emitted the stop signal (0 if none).
  int stop_layer = 0;
  std::vector<int> skipped_layers;
  std::string error;

  bool operator==(const Termination&) const = default;
};

/// Costs of attempts that failed and were retried. Kept apart from the
/// ledger, which has exactly one entry per logical call.
struct Diagnostics {
  std::int64_t failed_attempts = 0;
  std::int64_t failed_prompt_tokens = 0;

  bool operator==(const Diagnostics&) const = default;
};

struct RunTranscript {
  int schema_version = kTranscriptSchemaVersion;
  ConfigSnapshot config;
  QueryContext context;
  std::vector<LayerTrace> layers;
  std::vector<UsageRecord> ledger;
  Diagnostics diagnostics;
  Termination termination;
  std::string final_output;

  std::size_t call_count() const { return ledger.size(); }
  bool operator==(const RunTranscript&) const = default;
};

void to_json(nlohmann::json& j, const ChatMessage& m);
void from_json(const nlohmann::json& j, ChatMessage& m);
void to_json(nlohmann::json& j, const AgentSpec& a);
void from_json(const nlohmann::json& j, AgentSpec& a);
void to_json(nlohmann::json& j, const UsageRecord& u);
void from_json(const nlohmann::json& j, UsageRecord& u);
void to_json(nlohmann::json& j, const QueryContext& c);
void from_json(const nlohmann::json& j, QueryContext& c);
void to_json(nlohmann::json& j, const RunTranscript& t);
void from_json(const nlohmann::json& j, RunTranscript& t);

/// Canonical text form: two-space indented JSON with a trailing newline.
/// Byte-stable for equal transcripts.
std::string serialize_transcript(const RunTranscript& transcript);
RunTranscript parse_transcript(const std::string& text);

void write_transcript(const std::string& path, const RunTranscript& transcript);
RunTranscript read_transcript(const std::string& path);

}  // namespace amoa
