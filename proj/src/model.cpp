#include "amoa/model.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace amoa {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDuplicateId: return "duplicate-id";
    case ErrorCode::kMissingRole: return "missing-role";
    case ErrorCode::kTooFewCollaborators: return "too-few-collaborators";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kRemoteStatus: return "remote-status";
    case ErrorCode::kEmptyCompletion: return "empty-completion";
    case ErrorCode::kMissingFixture: return "missing-fixture";
    case ErrorCode::kWriteFailure: return "write-failure";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kOutOfOrder: return "out-of-order";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kDeadlineExceeded: return "deadline-exceeded";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kParse: return "parse";
  }
  return "unknown";
}

namespace {

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

const char* to_string(ChatRole role) {
  switch (role) {
    case ChatRole::kSystem: return "system";
    case ChatRole::kUser: return "user";
    case ChatRole::kAssistant: return "assistant";
  }
  return "user";
}

ChatRole chat_role_from_string(const std::string& s) {
  if (s == "system") return ChatRole::kSystem;
  if (s == "user") return ChatRole::kUser;
  if (s == "assistant") return ChatRole::kAssistant;
  throw Error(ErrorCode::kParse, "unknown chat role '" + s + "'");
}

QueryContext::QueryContext(std::vector<ChatMessage> history, std::string query)
    : history_(std::move(history)), query_(std::move(query)) {
  if (is_blank(query_)) {
    throw Error(ErrorCode::kInvalidArgument, "query is empty");
  }
  for (std::size_t i = 0; i < history_.size(); ++i) {
    const auto role = history_[i].role;
    if (role == ChatRole::kSystem) {
      throw Error(ErrorCode::kInvalidArgument,
                  "conversation history may only hold user/assistant turns");
    }
    if (i > 0 && history_[i - 1].role == role) {
      throw Error(ErrorCode::kInvalidArgument,
                  "conversation history roles must alternate (turn " +
                      std::to_string(i) + ")");
    }
  }
}

const char* to_string(AgentRole role) {
  switch (role) {
    case AgentRole::kCollaborative: return "collaborative";
    case AgentRole::kSummary: return "summary";
    case AgentRole::kResidual: return "residual";
    case AgentRole::kJudge: return "judge";
  }
  return "collaborative";
}

AgentRole agent_role_from_string(const std::string& s) {
  if (s == "collaborative") return AgentRole::kCollaborative;
  if (s == "summary") return AgentRole::kSummary;
  if (s == "residual") return AgentRole::kResidual;
  if (s == "judge") return AgentRole::kJudge;
  throw Error(ErrorCode::kParse, "unknown agent role '" + s + "'");
}

GenParams default_gen_params(AgentRole role) {
  GenParams params;
  params.temperature = role == AgentRole::kCollaborative ? 0.7 : 0.0;
  return params;
}

Roster validate_roster(std::vector<AgentSpec> agents) {
  Roster roster;
  std::set<std::string> seen;
  std::optional<std::size_t> summary;
  std::optional<std::size_t> residual;

  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    if (a.id.empty() || std::any_of(a.id.begin(), a.id.end(), [](unsigned char c) {
          return std::isspace(c) != 0;
        })) {
      throw Error(ErrorCode::kInvalidArgument,
                  "agent id must be a non-empty token without whitespace");
    }
    if (!seen.insert(a.id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate agent id '" + a.id + "'");
    }
    if (!(a.gen.temperature >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "agent '" + a.id + "': temperature must be >= 0");
    }
    if (a.gen.max_output_tokens <= 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "agent '" + a.id + "': max_output_tokens must be positive");
    }
    switch (a.role) {
      case AgentRole::kCollaborative:
        roster.collaborators_.push_back(a);
        break;
      case AgentRole::kSummary:
        if (summary) {
          throw Error(ErrorCode::kInvalidArgument, "roster has more than one summary agent");
        }
        summary = i;
        break;
      case AgentRole::kResidual:
        if (residual) {
          throw Error(ErrorCode::kInvalidArgument, "roster has more than one residual agent");
        }
        residual = i;
        break;
      case AgentRole::kJudge:
        if (roster.judge_index_) {
          throw Error(ErrorCode::kInvalidArgument, "roster has more than one judge agent");
        }
        roster.judge_index_ = i;
        break;
    }
  }
  if (!summary) throw Error(ErrorCode::kMissingRole, "roster has no summary agent");
  if (!residual) throw Error(ErrorCode::kMissingRole, "roster has no residual agent");
  if (roster.collaborators_.size() < 2) {
    throw Error(ErrorCode::kTooFewCollaborators,
                "roster needs at least 2 collaborative agents, got " +
                    std::to_string(roster.collaborators_.size()));
  }
  roster.summary_index_ = *summary;
  roster.residual_index_ = *residual;
  roster.agents_ = std::move(agents);
  return roster;
}

Roster validate_roster(const Roster& roster) { return validate_roster(roster.agents()); }

const char* to_string(AttentionMode mode) {
  return mode == AttentionMode::kPairwise ? "pairwise" : "singlepass";
}

AttentionMode attention_mode_from_string(const std::string& s) {
  if (s == "pairwise") return AttentionMode::kPairwise;
  if (s == "singlepass" || s == "single-pass") return AttentionMode::kSinglePass;
  throw Error(ErrorCode::kParse, "unknown attention mode '" + s + "'");
}

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::kSampling: return "sampling";
    case Phase::kAttention: return "attention";
    case Phase::kAggregation: return "aggregation";
    case Phase::kSummarization: return "summarization";
    case Phase::kResidual: return "residual";
    case Phase::kJudge: return "judge";
  }
  return "sampling";
}

Phase phase_from_string(const std::string& s) {
  for (auto p : {Phase::kSampling, Phase::kAttention, Phase::kAggregation,
                 Phase::kSummarization, Phase::kResidual, Phase::kJudge}) {
    if (s == to_string(p)) return p;
  }
  throw Error(ErrorCode::kParse, "unknown phase '" + s + "'");
}

const char* to_string(ResponseStage stage) {
  return stage == ResponseStage::kInitial ? "initial" : "refined";
}

ResponseStage response_stage_from_string(const std::string& s) {
  if (s == "initial") return ResponseStage::kInitial;
  if (s == "refined") return ResponseStage::kRefined;
  throw Error(ErrorCode::kParse, "unknown response stage '" + s + "'");
}

const char* to_string(AttentionKind kind) {
  return kind == AttentionKind::kSelf ? "self" : "cross";
}

AttentionKind attention_kind_from_string(const std::string& s) {
  if (s == "self") return AttentionKind::kSelf;
  if (s == "cross") return AttentionKind::kCross;
  throw Error(ErrorCode::kParse, "unknown attention kind '" + s + "'");
}

void check_instruction(const AttentionInstruction& instruction) {
  const bool same = instruction.advisor_id == instruction.recipient_id;
  if (same != (instruction.kind == AttentionKind::kSelf)) {
    throw Error(ErrorCode::kPrecondition,
                "attention kind '" + std::string(to_string(instruction.kind)) +
                    "' does not match advisor '" + instruction.advisor_id +
                    "' / recipient '" + instruction.recipient_id + "'");
  }
}

const char* to_string(OutputKind kind) {
  return kind == OutputKind::kAttentionSummary ? "attention_summary" : "residual_synthesis";
}

OutputKind output_kind_from_string(const std::string& s) {
  if (s == "attention_summary") return OutputKind::kAttentionSummary;
  if (s == "residual_synthesis") return OutputKind::kResidualSynthesis;
  throw Error(ErrorCode::kParse, "unknown output kind '" + s + "'");
}

void check_usage(const UsageRecord& record) {
  if (record.prompt_tokens < 0 || record.completion_tokens < 0 ||
      record.cached_prompt_tokens < 0) {
    throw Error(ErrorCode::kInvalidArgument, "usage counts must be non-negative");
  }
  if (record.cached_prompt_tokens > record.prompt_tokens) {
    throw Error(ErrorCode::kInvalidArgument, "cached prompt tokens exceed prompt tokens");
  }
}

}  // namespace amoa
