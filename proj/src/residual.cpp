#include "amoa/residual.hpp"

#include "amoa/templates.hpp"

namespace amoa {

HistoryStack push_history(HistoryStack stack, LayerOutput entry) {
  if (!stack.empty() && entry.layer <= stack.entries.back().layer) {
    throw Error(ErrorCode::kOutOfOrder, "layer " + std::to_string(entry.layer) +
                                            " pushed after layer " +
                                            std::to_string(stack.entries.back().layer));
  }
  stack.entries.push_back(std::move(entry));
  return stack;
}

HistoryStack advance_stack(HistoryStack stack, LayerOutput y) {
  if (stack.empty()) throw Error(ErrorCode::kPrecondition, "cannot advance an empty stack");
  auto& top = stack.entries.back();
  if (top.layer != y.layer || top.kind != OutputKind::kAttentionSummary) {
    throw Error(ErrorCode::kPrecondition,
                "stack top is not the layer-" + std::to_string(y.layer) + " attention summary");
  }
  y.kind = OutputKind::kResidualSynthesis;
  top = std::move(y);
  return stack;
}

ResidualOutcome synthesize(CallRunner& runner, const QueryContext& ctx, const HistoryStack& stack,
                           const AgentSpec& residual_agent, bool es_enabled) {
  if (stack.size() < 2) {
    throw Error(ErrorCode::kPrecondition, "residual synthesis needs at least two rounds");
  }
  const int layer = stack.entries.back().layer;
  const auto prompt = templates::render_residual(ctx, stack, es_enabled);
  const auto outcome = runner.run_one(PlannedCall{Phase::kResidual, layer, &residual_agent, "",
                                                  make_request(prompt, residual_agent.gen)});

  ResidualOutcome result;
  result.raw_completion = outcome.text;
  if (es_enabled && templates::detect_stop_sentinel(outcome.text)) {
    result.signal = TerminationSignal{true, layer};
    result.output = stack.entries[stack.size() - 2];
  } else {
    result.signal = TerminationSignal{false, layer};
    result.output = LayerOutput{layer, outcome.text, OutputKind::kResidualSynthesis};
  }
  return result;
}

}  // namespace amoa
