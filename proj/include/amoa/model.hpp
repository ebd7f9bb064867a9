#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amoa/error.hpp"

namespace amoa {

// ---------------------------------------------------------------------------
// Conversation
// ---------------------------------------------------------------------------

enum class ChatRole { kSystem, kUser, kAssistant };

const char* to_string(ChatRole role);
ChatRole chat_role_from_string(const std::string& s);

struct ChatMessage {
  ChatRole role = ChatRole::kUser;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

/// Conversation history plus the latest user query. The query is what every
/// prompt template calls {user_query}; the history renders as {conv_history}.
class QueryContext {
 public:
  QueryContext() = default;

  /// Throws Error(kInvalidArgument) if the query is blank, a history turn is
  /// a system message, or user/assistant turns do not alternate.
  QueryContext(std::vector<ChatMessage> history, std::string query);

  const std::vector<ChatMessage>& history() const { return history_; }
  const std::string& query() const { return query_; }

  bool operator==(const QueryContext&) const = default;

 private:
  std::vector<ChatMessage> history_;
  std::string query_;
};

// ---------------------------------------------------------------------------
// Agents
// ---------------------------------------------------------------------------

enum class AgentRole { kCollaborative, kSummary, kResidual, kJudge };

const char* to_string(AgentRole role);
AgentRole agent_role_from_string(const std::string& s);

struct GenParams {
  double temperature = 0.7;
  int max_output_tokens = 2048;

  bool operator==(const GenParams&) const = default;
};

/// Engine defaults: collaborators sample at 0.7, every other role is greedy.
GenParams default_gen_params(AgentRole role);

struct AgentSpec {
  std::string id;
  AgentRole role = AgentRole::kCollaborative;
  std::string backend;  // name of a backend binding in the registry
  GenParams gen;

  bool operator==(const AgentSpec&) const = default;
};

/// A roster that passed validate_roster(). Collaborators keep their input
/// order; that order is the "roster order" used for model numbering.
class Roster {
 public:
  const std::vector<AgentSpec>& agents() const { return agents_; }
  const std::vector<AgentSpec>& collaborators() const { return collaborators_; }
  const AgentSpec& summary() const { return agents_[summary_index_]; }
  const AgentSpec& residual() const { return agents_[residual_index_]; }
  const AgentSpec* judge() const {
    return judge_index_ ? &agents_[*judge_index_] : nullptr;
  }
  std::size_t size() const { return collaborators_.size(); }

  bool operator==(const Roster& other) const { return agents_ == other.agents_; }

 private:
  friend Roster validate_roster(std::vector<AgentSpec> agents);
  friend Roster validate_roster(const Roster& roster);

  std::vector<AgentSpec> agents_;
  std::vector<AgentSpec> collaborators_;
  std::size_t summary_index_ = 0;
  std::size_t residual_index_ = 0;
  std::optional<std::size_t> judge_index_;
};

/// Checks id uniqueness, gen params, and role counts: at least two
/// collaborators, exactly one summary agent, exactly one residual agent, at
/// most one judge.
Roster validate_roster(std::vector<AgentSpec> agents);
Roster validate_roster(const Roster& roster);

// ---------------------------------------------------------------------------
// Per-layer values
// ---------------------------------------------------------------------------

/// Cross-attention strategy: one critique call per (advisor, peer) pair, or one
/// call per advisor that covers all peers and returns a JSON suggestion map.
enum class AttentionMode { kPairwise, kSinglePass };

const char* to_string(AttentionMode mode);
AttentionMode attention_mode_from_string(const std::string& s);

enum class Phase { kSampling, kAttention, kAggregation, kSummarization, kResidual, kJudge };

const char* to_string(Phase phase);
Phase phase_from_string(const std::string& s);

enum class ResponseStage { kInitial, kRefined };

const char* to_string(ResponseStage stage);
ResponseStage response_stage_from_string(const std::string& s);

struct AgentResponse {
  std::string agent_id;
  int layer = 1;
  ResponseStage stage = ResponseStage::kInitial;
  std::string text;
  std::size_t call_id = 0;  // ledger entry holding this response's usage

  bool operator==(const AgentResponse&) const = default;
};

enum class AttentionKind { kSelf, kCross };

const char* to_string(AttentionKind kind);
AttentionKind attention_kind_from_string(const std::string& s);

struct AttentionInstruction {
  std::string advisor_id;
  std::string recipient_id;
  int layer = 1;
  AttentionKind kind = AttentionKind::kCross;
  std::string text;

  bool operator==(const AttentionInstruction&) const = default;
};

/// Throws Error(kPrecondition) unless kind == self exactly when advisor and
/// recipient coincide.
void check_instruction(const AttentionInstruction& instruction);

enum class OutputKind { kAttentionSummary, kResidualSynthesis };

const char* to_string(OutputKind kind);
OutputKind output_kind_from_string(const std::string& s);

struct LayerOutput {
  int layer = 1;
  std::string text;
  OutputKind kind = OutputKind::kAttentionSummary;

  bool operator==(const LayerOutput&) const = default;
};

/// Ordered per-layer outputs [y_1, ..., y_{l-1}, ~y_l]; strictly increasing
/// layer numbers are enforced by the residual module's push/advance.
struct HistoryStack {
  std::vector<LayerOutput> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool operator==(const HistoryStack&) const = default;
};

struct TerminationSignal {
  bool stopped = false;
  int layer = 0;

  bool operator==(const TerminationSignal&) const = default;
};

// ---------------------------------------------------------------------------
// Accounting values
// ---------------------------------------------------------------------------

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  bool operator==(const TokenUsage&) const = default;
};

struct UsageRecord {
  std::size_t call_id = 0;
  Phase phase = Phase::kSampling;
  int layer = 0;
  std::string agent_id;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t cached_prompt_tokens = 0;

  bool operator==(const UsageRecord&) const = default;
};

/// Throws Error(kInvalidArgument) on negative counts or cached > prompt.
void check_usage(const UsageRecord& record);

}  // namespace amoa
