#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include "amoa/accounting.hpp"
#include "amoa/backend.hpp"
#include "amoa/model.hpp"
#include "amoa/transcript.hpp"

namespace amoa {

struct PipelineConfig {
  Roster roster;
  int max_depth = 5;
  AttentionMode attention = AttentionMode::kPairwise;
  bool early_stop = false;
  CacheModel cache;
  std::uint64_t seed = 0;
  Tokenizer tokenizer = Tokenizer::approx_chars();
  CallOptions call;
  /// Whole-run wall-clock budget; no limit when absent.
  std::optional<std::chrono::milliseconds> run_deadline;
};

/// Throws Error(kInvalidArgument) on a depth below 1.
void validate_config(const PipelineConfig& config);

/// u_l: the query alone at layer 1, the query plus y_{l-1} afterwards.
struct LayerInput {
  QueryContext context;
  std::optional<std::string> previous;
};

LayerInput build_layer_input(const QueryContext& ctx, const std::optional<LayerOutput>& prev);

ConfigSnapshot snapshot(const PipelineConfig& config);

/// The L-layer executor. Holds no per-run state, so one instance may serve
/// several runs as long as each run() call has its own thread.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, BackendRegistry backends);

  /// Never throws for stage failures: the transcript comes back marked
  /// failed with everything committed up to the failure.
  RunTranscript run(const QueryContext& ctx) const;

  const PipelineConfig& config() const { return config_; }

 private:
  PipelineConfig config_;
  BackendRegistry backends_;
};

/// Total calls of a run without early stopping.
std::size_t expected_calls(std::size_t n, int depth, AttentionMode mode);

}  // namespace amoa
