#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amoa/accounting.hpp"
#include "amoa/backend.hpp"
#include "amoa/model.hpp"
#include "amoa/templates.hpp"
#include "amoa/transcript.hpp"

namespace amoa {

/// An error raised while running one pipeline stage, tagged with where it
/// happened. code() is the underlying failure's code.
class StageError : public Error {
 public:
  StageError(ErrorCode code, Phase phase, int layer, std::string agent_id, const std::string& what)
      : Error(code, std::string(to_string(phase)) + " stage, layer " + std::to_string(layer) +
                        ", agent '" + agent_id + "': " + what),
        phase_(phase),
        layer_(layer),
        agent_id_(std::move(agent_id)) {}

  Phase phase() const noexcept { return phase_; }
  int layer() const noexcept { return layer_; }
  const std::string& agent_id() const noexcept { return agent_id_; }

 private:
  Phase phase_;
  int layer_;
  std::string agent_id_;
};

/// A rendered prompt as a single-turn chat request.
ChatRequest make_request(const templates::RenderedPrompt& prompt, const GenParams& gen);

struct PlannedCall {
  Phase phase = Phase::kSampling;
  int layer = 1;
  const AgentSpec* agent = nullptr;
  std::string target;
  ChatRequest request;
};

struct CallOutcome {
  std::size_t call_id = 0;
  std::string text;
};

/// Issues batches of calls concurrently and commits them in the order they
/// were planned: call ids, ledger entries, and prefix-cache lookups all follow
/// plan order, never completion order. Every committed call lands once in
/// the bound transcript's ledger and once in the bound layer's call list.
class CallRunner {
 public:
  using Clock = std::chrono::steady_clock;

  CallRunner(const BackendRegistry& backends, Tokenizer tokenizer, CallOptions options,
             CacheModel cache_model);

  /// Where committed calls go. Both must outlive the next run_batch().
  void bind(RunTranscript* transcript, LayerTrace* layer);
  void set_deadline(std::optional<Clock::time_point> deadline) { deadline_ = deadline; }

  /// Results in plan order. If any call fails, the successful ones are still
  /// committed and the failure with the lowest plan index is rethrown as a
  /// StageError.
  std::vector<CallOutcome> run_batch(std::span<const PlannedCall> calls);
  CallOutcome run_one(const PlannedCall& call);

  const Tokenizer& tokenizer() const { return tokenizer_; }
  const CacheModel& cache_model() const { return cache_.model(); }

 private:
  ChatBackend& backend_for(const AgentSpec& agent) const;

  const BackendRegistry& backends_;
  Tokenizer tokenizer_;
  CallOptions options_;
  PrefixCache cache_;
  RunTranscript* transcript_ = nullptr;
  LayerTrace* layer_ = nullptr;
  std::optional<Clock::time_point> deadline_;
};

}  // namespace amoa
