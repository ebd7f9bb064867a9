#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "amoa/backend.hpp"
#include "amoa/model.hpp"
#include "amoa/pipeline.hpp"

namespace amoa {

/// Reads the declarative experiment file: `key = value` lines, `[table]` and
/// `[table.sub]` headers, `[[array]]` tables, `#` comments. Values are
/// double-quoted strings, integers, floats, true/false, or one-line arrays
/// of those. Throws Error(kConfig) with the offending line number.
nlohmann::json parse_config_text(std::string_view text);

/// Everything a run needs besides the query.
struct RunSettings {
  std::uint64_t seed = 0;
  int layers = 5;
  AttentionMode attention = AttentionMode::kPairwise;
  bool early_stop = false;
  bool prefix_cache = true;
  double cache_hit_cost = 0.0;
  std::string tokenizer = "approx_chars";
  double timeout_s = 120.0;
  int retries = 2;
  std::optional<double> run_deadline_s;
  int parallel = 4;
  std::vector<BackendSpec> backends;
  std::vector<AgentSpec> agents;
};

RunSettings settings_from_json(const nlohmann::json& doc);
RunSettings load_settings(const std::string& path);

/// N collaborators a1..aN plus "aggregator", "residual" and "judge", all on
/// one mock backend named "mock".
RunSettings mock_settings(std::size_t collaborators, std::uint64_t seed);

/// Replaces the roster with `collaborators` mock-style agents while keeping
/// the non-collaborative agents and their bindings.
void resize_collaborators(RunSettings& settings, std::size_t collaborators);

/// Mock backends without their own seed take the run seed.
BackendRegistry build_backends(const RunSettings& settings);

PipelineConfig pipeline_config(const RunSettings& settings);

}  // namespace amoa
