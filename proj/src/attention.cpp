#include "amoa/attention.hpp"

#include <algorithm>

#include "amoa/templates.hpp"

namespace amoa {

std::size_t attention_layer_calls(std::size_t n, AttentionMode mode) {
  const std::size_t critique = mode == AttentionMode::kPairwise ? n * n : 2 * n;
  return n + critique + n + 1;
}

namespace {

std::vector<std::string> collaborator_ids(const Roster& roster) {
  std::vector<std::string> ids;
  ids.reserve(roster.size());
  for (const auto& a : roster.collaborators()) ids.push_back(a.id);
  return ids;
}

void check_responses(std::span<const AgentResponse> responses, const Roster& roster) {
  const auto& collaborators = roster.collaborators();
  if (responses.size() != collaborators.size()) {
    throw Error(ErrorCode::kPrecondition, "expected " + std::to_string(collaborators.size()) +
                                              " responses, got " + std::to_string(responses.size()));
  }
  for (std::size_t i = 0; i < responses.size(); ++i) {
    if (responses[i].agent_id != collaborators[i].id) {
      throw Error(ErrorCode::kPrecondition, "responses are not in roster order");
    }
  }
}

bool covers_all_peers(const templates::SuggestionMap& map, std::size_t peers) {
  for (std::size_t k = 1; k <= peers; ++k) {
    if (!map.contains(static_cast<int>(k))) return false;
  }
  return true;
}

}  // namespace

std::vector<AgentResponse> sample_responses(CallRunner& runner, const QueryContext& ctx,
                                            const std::optional<std::string>& prev_output,
                                            const Roster& roster, int layer) {
  const auto prompt = templates::render_sampling(ctx, prev_output);
  std::vector<PlannedCall> plan;
  for (const auto& agent : roster.collaborators()) {
    plan.push_back(PlannedCall{Phase::kSampling, layer, &agent, "", make_request(prompt, agent.gen)});
  }
  const auto outcomes = runner.run_batch(plan);

  std::vector<AgentResponse> responses;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    responses.push_back(AgentResponse{plan[i].agent->id, layer, ResponseStage::kInitial,
                                      outcomes[i].text, outcomes[i].call_id});
  }
  return responses;
}

std::vector<AttentionInstruction> compute_attention(CallRunner& runner, const QueryContext& ctx,
                                                    std::span<const AgentResponse> responses,
                                                    const Roster& roster, AttentionMode mode,
                                                    int layer) {
  const auto& agents = roster.collaborators();
  const std::size_t n = agents.size();
  if (n < 2) throw Error(ErrorCode::kPrecondition, "attention needs at least two collaborators");
  check_responses(responses, roster);

  // matrix[i][j]: advisor i's instruction for recipient j
  std::vector<std::vector<std::string>> matrix(n, std::vector<std::string>(n));

  if (mode == AttentionMode::kPairwise) {
    std::vector<PlannedCall> plan;
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const auto prompt =
            i == j ? templates::render_self_attention(ctx, responses[i].text)
                   : templates::render_cross_pairwise(ctx, responses[i].text, responses[j].text);
        plan.push_back(PlannedCall{Phase::kAttention, layer, &agents[i], i == j ? "self" : agents[j].id,
                                   make_request(prompt, agents[i].gen)});
        cells.emplace_back(i, j);
      }
    }
    const auto outcomes = runner.run_batch(plan);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      matrix[cells[c].first][cells[c].second] = outcomes[c].text;
    }
  } else {
    // Per advisor: [critique of all peers, self-review].
    std::vector<PlannedCall> plan;
    std::vector<std::vector<std::size_t>> peers_of(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::string> peer_answers;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        peers_of[i].push_back(j);
        peer_answers.push_back(responses[j].text);
      }
      const auto cross = templates::render_cross_singlepass(ctx, responses[i].text, peer_answers);
      plan.push_back(PlannedCall{Phase::kAttention, layer, &agents[i], "peers",
                                 make_request(cross, agents[i].gen)});
      const auto self = templates::render_self_attention(ctx, responses[i].text);
      plan.push_back(PlannedCall{Phase::kAttention, layer, &agents[i], "self",
                                 make_request(self, agents[i].gen)});
    }
    const auto outcomes = runner.run_batch(plan);

    std::vector<PlannedCall> reasks;
    std::vector<std::size_t> reask_advisors;
    for (std::size_t i = 0; i < n; ++i) {
      matrix[i][i] = outcomes[2 * i + 1].text;
      const auto& critique = outcomes[2 * i].text;
      std::optional<templates::SuggestionMap> parsed;
      try {
        parsed = templates::parse_singlepass(critique);
      } catch (const Error&) {
      }
      if (parsed && covers_all_peers(*parsed, peers_of[i].size())) {
        for (std::size_t k = 0; k < peers_of[i].size(); ++k) {
          matrix[i][peers_of[i][k]] = parsed->at(static_cast<int>(k + 1));
        }
        continue;
      }
      auto request = plan[2 * i].request;
      request.messages.push_back(ChatMessage{ChatRole::kAssistant, critique});
      request.messages.push_back(ChatMessage{ChatRole::kUser, templates::singlepass_reask_message()});
      reasks.push_back(PlannedCall{Phase::kAttention, layer, &agents[i], "reask", std::move(request)});
      reask_advisors.push_back(i);
    }

    if (!reasks.empty()) {
      const auto retried = runner.run_batch(reasks);
      for (std::size_t r = 0; r < reasks.size(); ++r) {
        const auto i = reask_advisors[r];
        std::optional<templates::SuggestionMap> parsed;
        try {
          parsed = templates::parse_singlepass(retried[r].text);
        } catch (const Error&) {
        }
        const bool usable = parsed && covers_all_peers(*parsed, peers_of[i].size());
        for (std::size_t k = 0; k < peers_of[i].size(); ++k) {
          matrix[i][peers_of[i][k]] = usable ? parsed->at(static_cast<int>(k + 1)) : retried[r].text;
        }
      }
    }
  }

  std::vector<AttentionInstruction> instructions;
  instructions.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      instructions.push_back(AttentionInstruction{agents[i].id, agents[j].id, layer,
                                                  i == j ? AttentionKind::kSelf : AttentionKind::kCross,
                                                  matrix[i][j]});
    }
  }
  return instructions;
}

std::vector<AttentionInstruction> instructions_for(std::span<const AttentionInstruction> matrix,
                                                   const std::string& recipient_id,
                                                   const Roster& roster) {
  std::vector<AttentionInstruction> out;
  for (const auto& advisor : roster.collaborators()) {
    for (const auto& ins : matrix) {
      if (ins.advisor_id == advisor.id && ins.recipient_id == recipient_id) {
        out.push_back(ins);
        break;
      }
    }
  }
  return out;
}

namespace {

PlannedCall plan_aggregation(const QueryContext& ctx, const AgentResponse& response,
                             std::span<const AttentionInstruction> instructions, const Roster& roster) {
  const auto& agents = roster.collaborators();
  const auto agent = std::find_if(agents.begin(), agents.end(),
                                  [&](const AgentSpec& a) { return a.id == response.agent_id; });
  if (agent == agents.end()) {
    throw Error(ErrorCode::kPrecondition, "unknown collaborator '" + response.agent_id + "'");
  }
  if (instructions.size() != agents.size()) {
    throw Error(ErrorCode::kPrecondition,
                "aggregation for '" + response.agent_id + "' needs " + std::to_string(agents.size()) +
                    " instructions, got " + std::to_string(instructions.size()));
  }
  const bool has_self = std::any_of(instructions.begin(), instructions.end(), [&](const auto& ins) {
    return ins.kind == AttentionKind::kSelf && ins.advisor_id == response.agent_id &&
           ins.recipient_id == response.agent_id;
  });
  if (!has_self) {
    throw Error(ErrorCode::kPrecondition, "missing self-instruction for '" + response.agent_id + "'");
  }
  const auto ids = collaborator_ids(roster);
  const auto prompt = templates::render_aggregation(ctx, response.text, instructions, ids);
  return PlannedCall{Phase::kAggregation, response.layer, &*agent, "", make_request(prompt, agent->gen)};
}

}  // namespace

AgentResponse aggregate(CallRunner& runner, const QueryContext& ctx, const AgentResponse& response,
                        std::span<const AttentionInstruction> instructions, const Roster& roster) {
  const auto call = plan_aggregation(ctx, response, instructions, roster);
  const auto outcome = runner.run_one(call);
  return AgentResponse{response.agent_id, response.layer, ResponseStage::kRefined, outcome.text,
                       outcome.call_id};
}

std::vector<AgentResponse> aggregate_all(CallRunner& runner, const QueryContext& ctx,
                                         std::span<const AgentResponse> responses,
                                         std::span<const AttentionInstruction> matrix,
                                         const Roster& roster) {
  check_responses(responses, roster);
  std::vector<PlannedCall> plan;
  for (const auto& response : responses) {
    const auto addressed = instructions_for(matrix, response.agent_id, roster);
    plan.push_back(plan_aggregation(ctx, response, addressed, roster));
  }
  const auto outcomes = runner.run_batch(plan);
  std::vector<AgentResponse> refined;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    refined.push_back(AgentResponse{responses[i].agent_id, responses[i].layer, ResponseStage::kRefined,
                                    outcomes[i].text, outcomes[i].call_id});
  }
  return refined;
}

std::string summarize(CallRunner& runner, const QueryContext& ctx,
                      std::span<const AgentResponse> refined, const Roster& roster, int layer) {
  check_responses(refined, roster);
  std::vector<std::string> texts;
  for (const auto& r : refined) texts.push_back(r.text);
  const auto prompt = templates::render_summarization(ctx, texts);
  const auto& agent = roster.summary();
  return runner
      .run_one(PlannedCall{Phase::kSummarization, layer, &agent, "", make_request(prompt, agent.gen)})
      .text;
}

LayerRecord run_attention_layer(CallRunner& runner, const QueryContext& ctx,
                                const std::optional<std::string>& prev_output,
                                const Roster& roster, AttentionMode mode, int layer) {
  LayerRecord record;
  record.layer = layer;
  record.initial = sample_responses(runner, ctx, prev_output, roster, layer);
  record.instructions = compute_attention(runner, ctx, record.initial, roster, mode, layer);
  record.refined = aggregate_all(runner, ctx, record.initial, record.instructions, roster);
  record.summary = summarize(runner, ctx, record.refined, roster, layer);
  return record;
}

}  // namespace amoa
