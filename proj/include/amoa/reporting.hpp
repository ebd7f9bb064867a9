#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amoa/accounting.hpp"
#include "amoa/transcript.hpp"

namespace amoa {

struct LoadedTranscripts {
  std::vector<RunTranscript> transcripts;  // sorted by file name
  std::vector<std::string> warnings;       // one per skipped file
};

/// Every *.json under `dir` (recursively). Files that do not parse are
/// skipped with a warning.
LoadedTranscripts load_transcript_dir(const std::string& dir);

/// One row per configuration (attention, agents, layers, early_stop) with
/// per-run means. header:
/// attention,agents,layers,early_stop,runs,stopped,mean_calls,mean_raw,mean_cached,mean_effective
std::string depth_table_csv(const std::vector<RunTranscript>& transcripts);

/// header: stop_layer,runs (stopped runs only)
std::string stop_histogram_csv(const CostReport& report);

}  // namespace amoa
