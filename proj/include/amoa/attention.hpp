#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amoa/call_runner.hpp"
#include "amoa/model.hpp"

namespace amoa {

/// Everything the intra-layer attention module produced for one layer.
struct LayerRecord {
  int layer = 1;
  std::vector<AgentResponse> initial;                // r_{i,l}, roster order
  std::vector<AttentionInstruction> instructions;    // advisor-major, then recipient
  std::vector<AgentResponse> refined;                // r'_{j,l}, roster order
  std::string summary;                               // ~y_l
};

/// Calls the closed forms predict for one attention layer of N collaborators.
std::size_t attention_layer_calls(std::size_t n, AttentionMode mode);

/// One initial response per collaborator, issued concurrently, returned in
/// roster order.
std::vector<AgentResponse> sample_responses(CallRunner& runner, const QueryContext& ctx,
                                            const std::optional<std::string>& prev_output,
                                            const Roster& roster, int layer);

/// Fills the full N x N instruction matrix. Pairwise mode spends N^2 calls
/// (N(N-1) critiques + N self-reviews); single-pass spends 2N (one critique
/// of all peers + one self-review per advisor), plus one re-ask for each
/// critique whose JSON cannot be read. A critique that is still unreadable
/// after the re-ask is broadcast verbatim to every peer.
std::vector<AttentionInstruction> compute_attention(CallRunner& runner, const QueryContext& ctx,
                                                    std::span<const AgentResponse> responses,
                                                    const Roster& roster, AttentionMode mode,
                                                    int layer);

/// The instructions addressed to `recipient_id`, in roster order of advisor.
std::vector<AttentionInstruction> instructions_for(std::span<const AttentionInstruction> matrix,
                                                   const std::string& recipient_id,
                                                   const Roster& roster);

/// Revises one agent's response with the N instructions addressed to it.
AgentResponse aggregate(CallRunner& runner, const QueryContext& ctx, const AgentResponse& response,
                        std::span<const AttentionInstruction> instructions, const Roster& roster);

/// Aggregation for every collaborator, concurrently, roster order.
std::vector<AgentResponse> aggregate_all(CallRunner& runner, const QueryContext& ctx,
                                         std::span<const AgentResponse> responses,
                                         std::span<const AttentionInstruction> matrix,
                                         const Roster& roster);

/// One call to the summary agent over all refined responses.
std::string summarize(CallRunner& runner, const QueryContext& ctx,
                      std::span<const AgentResponse> refined, const Roster& roster, int layer);

/// sample -> attention -> aggregation -> summary, each stage a barrier.
LayerRecord run_attention_layer(CallRunner& runner, const QueryContext& ctx,
                                const std::optional<std::string>& prev_output,
                                const Roster& roster, AttentionMode mode, int layer);

}  // namespace amoa
