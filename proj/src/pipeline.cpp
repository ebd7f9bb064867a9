#include "amoa/pipeline.hpp"

#include "amoa/attention.hpp"
#include "amoa/call_runner.hpp"
#include "amoa/residual.hpp"

namespace amoa {

void validate_config(const PipelineConfig& config) {
  if (config.max_depth < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "max depth must be at least 1, got " + std::to_string(config.max_depth));
  }
  if (config.cache.hit_cost_factor < 0.0 || config.cache.hit_cost_factor > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "cache hit cost must lie in [0, 1]");
  }
  validate_roster(config.roster);
}

LayerInput build_layer_input(const QueryContext& ctx, const std::optional<LayerOutput>& prev) {
  LayerInput input{ctx, std::nullopt};
  if (prev) input.previous = prev->text;
  return input;
}

ConfigSnapshot snapshot(const PipelineConfig& config) {
  ConfigSnapshot snap;
  snap.roster = config.roster.agents();
  snap.max_depth = config.max_depth;
  snap.attention = config.attention;
  snap.early_stop = config.early_stop;
  snap.prefix_cache = config.cache.enabled;
  snap.cache_hit_cost = config.cache.hit_cost_factor;
  snap.tokenizer = config.tokenizer.name();
  snap.seed = config.seed;
  return snap;
}

std::size_t expected_calls(std::size_t n, int depth, AttentionMode mode) {
  const auto layers = static_cast<std::size_t>(depth);
  return layers * attention_layer_calls(n, mode) + (layers - 1);
}

Pipeline::Pipeline(PipelineConfig config, BackendRegistry backends)
    : config_(std::move(config)), backends_(std::move(backends)) {
  validate_config(config_);
  for (const auto& agent : config_.roster.agents()) {
    if (!backends_.contains(agent.backend)) {
      throw Error(ErrorCode::kConfig,
                  "agent '" + agent.id + "' is bound to unknown backend '" + agent.backend + "'");
    }
  }
}

RunTranscript Pipeline::run(const QueryContext& ctx) const {
  RunTranscript transcript;
  transcript.config = snapshot(config_);
  transcript.context = ctx;
  transcript.layers.reserve(static_cast<std::size_t>(config_.max_depth));

  CallRunner runner(backends_, config_.tokenizer, config_.call, config_.cache);
  if (config_.run_deadline) {
    runner.set_deadline(CallRunner::Clock::now() + *config_.run_deadline);
  }

  const auto& roster = config_.roster;
  HistoryStack stack;
  std::optional<LayerOutput> prev;
  auto& term = transcript.termination;

  for (int l = 1; l <= config_.max_depth; ++l) {
    transcript.layers.push_back(LayerTrace{});
    auto& trace = transcript.layers.back();
    trace.layer = l;
    runner.bind(&transcript, &trace);
    term.layers_run = l;

    const auto input = build_layer_input(ctx, prev);
    trace.layer_input = input.previous;
    try {
      trace.initial = sample_responses(runner, ctx, input.previous, roster, l);
      trace.instructions = compute_attention(runner, ctx, trace.initial, roster, config_.attention, l);
      trace.refined = aggregate_all(runner, ctx, trace.initial, trace.instructions, roster);
      trace.summary = summarize(runner, ctx, trace.refined, roster, l);
      stack = push_history(std::move(stack), LayerOutput{l, *trace.summary, OutputKind::kAttentionSummary});

      if (l == 1) {
        trace.output = stack.entries.back();
      } else {
        const auto outcome = synthesize(runner, ctx, stack, roster.residual(), config_.early_stop);
        trace.residual = ResidualTrace{outcome.raw_completion, outcome.signal.stopped, stack.size()};
        if (outcome.signal.stopped) {
          term.status = RunStatus::kStopped;
          term.stop_layer = l;
          for (int skipped = l + 1; skipped <= config_.max_depth; ++skipped) {
            term.skipped_layers.push_back(skipped);
          }
          transcript.final_output = outcome.output.text;
          return transcript;
        }
        stack = advance_stack(std::move(stack), outcome.output);
        trace.output = stack.entries.back();
      }
      prev = trace.output;
    } catch (const std::exception& e) {
      term.status = RunStatus::kFailed;
      term.error = e.what();
      if (prev) transcript.final_output = prev->text;
      return transcript;
    }
  }

  term.status = RunStatus::kCompleted;
  transcript.final_output = prev->text;
  return transcript;
}

}  // namespace amoa
