#pragma once

#include <string>

#include "amoa/call_runner.hpp"
#include "amoa/model.hpp"

namespace amoa {

struct ResidualOutcome {
  LayerOutput output;  // y_l, or the previous synthesis when stopped
  TerminationSignal signal;
  std::string raw_completion;
};

/// Appends `entry`; its layer must exceed the current top's.
HistoryStack push_history(HistoryStack stack, LayerOutput entry);

/// Replaces the top ~y_l with the synthesis y_l it produced.
HistoryStack advance_stack(HistoryStack stack, LayerOutput y);

/// One call to the residual agent over the whole stack. With early stopping
/// on, a completion carrying the stop sentinel yields a stopped signal and
/// falls back to the entry just below the top, which is y_{l-1}.
ResidualOutcome synthesize(CallRunner& runner, const QueryContext& ctx, const HistoryStack& stack,
                           const AgentSpec& residual_agent, bool es_enabled);

}  // namespace amoa
