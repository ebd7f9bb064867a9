#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "amoa/model.hpp"
#include "amoa/transcript.hpp"

namespace amoa {

// ---------------------------------------------------------------------------
// Token counting
// ---------------------------------------------------------------------------

/// Local, provider-independent token counting rule. The ledger always uses
/// these counts so runs over different providers stay comparable.
class Tokenizer {
 public:
  enum class Kind { kApproxChars, kWhitespace, kExternal };
  using Hook = std::function<std::int64_t(std::string_view)>;

  /// ceil(bytes / 4)
  static Tokenizer approx_chars();
  /// number of maximal non-whitespace runs
  static Tokenizer whitespace();
  static Tokenizer external(std::string name, Hook hook);
  /// "approx_chars" or "whitespace"
  static Tokenizer from_name(const std::string& name);

  std::int64_t count(std::string_view text) const;
  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }

 private:
  Tokenizer(Kind kind, std::string name, Hook hook = {})
      : kind_(kind), name_(std::move(name)), hook_(std::move(hook)) {}

  Kind kind_;
  std::string name_;
  Hook hook_;
};

inline std::int64_t count_tokens(std::string_view text, const Tokenizer& tokenizer) {
  return tokenizer.count(text);
}

// ---------------------------------------------------------------------------
// Prefix cache model
// ---------------------------------------------------------------------------

struct CacheModel {
  bool enabled = true;
  /// Price of a cached prompt token relative to an uncached one; 0 counts
  /// cache hits as free ("tokens saved"), 1 makes caching irrelevant.
  double hit_cost_factor = 0.0;

  /// (prompt - cached) + factor * cached
  double effective_prompt_tokens(std::int64_t prompt_tokens,
                                 std::int64_t cached_prompt_tokens) const;
};

std::size_t common_prefix_length(std::string_view a, std::string_view b);

/// Prompts already issued within one (backend, agent) scope. Sorted storage
/// means the longest prefix match against any stored prompt is found at one
/// of the two lexicographic neighbours of the new prompt.
class PrefixStore {
 public:
  /// Length in bytes of the longest prefix of `prompt` that equals a prefix
  /// of some stored prompt. Does not store `prompt`.
  std::size_t longest_match(std::string_view prompt) const;
  void insert(std::string prompt) { prompts_.insert(std::move(prompt)); }
  std::size_t size() const { return prompts_.size(); }

 private:
  std::set<std::string, std::less<>> prompts_;
};

/// Run-scoped cache: one PrefixStore per (backend, agent) pair.
class PrefixCache {
 public:
  PrefixCache(CacheModel model, Tokenizer tokenizer)
      : model_(model), tokenizer_(std::move(tokenizer)) {}

  /// Sets record.cached_prompt_tokens from the longest prefix of `prompt`
  /// already issued in the same scope, then remembers `prompt`. With caching
  /// disabled the cached count is 0 and nothing is stored.
  void apply(UsageRecord& record, const std::string& backend, const std::string& prompt);

  const CacheModel& model() const { return model_; }
  void reset();

 private:
  CacheModel model_;
  Tokenizer tokenizer_;
  std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, PrefixStore> scopes_;
};

// ---------------------------------------------------------------------------
// Cost reports
// ---------------------------------------------------------------------------

struct CostTotals {
  std::int64_t calls = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t cached_prompt_tokens = 0;
  double effective_tokens = 0.0;

  /// prompt + completion
  std::int64_t raw_tokens() const { return prompt_tokens + completion_tokens; }
  void add(const UsageRecord& record, const CacheModel& model);
  void add(const CostTotals& other);
};

struct CostRow {
  int layer = 0;
  Phase phase = Phase::kSampling;
  std::string agent_id;
  CostTotals totals;
};

struct CostReport {
  std::int64_t runs = 0;
  std::int64_t failed_runs = 0;
  CostTotals overall;
  std::map<int, CostTotals> by_layer;
  std::map<Phase, CostTotals> by_phase;
  std::map<std::pair<int, Phase>, CostTotals> by_layer_phase;
  /// (layer, phase, agent) rows in canonical order.
  std::vector<CostRow> rows;
  /// stop layer -> number of runs that stopped there
  std::map<int, std::int64_t> stop_histogram;
  /// layers actually executed -> number of runs
  std::map<int, std::int64_t> depth_histogram;
};

/// Effective tokens count cached prompt tokens at each transcript's own
/// cache_hit_cost factor (0 when its prefix cache was disabled, since then
/// no entry has cached tokens).
CostReport summarize_costs(std::span<const RunTranscript> transcripts);
CostReport summarize_costs(const RunTranscript& transcript);

/// header: layer,phase,agent,raw,cached,effective
std::string cost_report_csv(const CostReport& report);
nlohmann::json cost_report_json(const CostReport& report);

}  // namespace amoa
