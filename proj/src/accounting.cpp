#include "amoa/accounting.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <sstream>

namespace amoa {

Tokenizer Tokenizer::approx_chars() { return Tokenizer(Kind::kApproxChars, "approx_chars"); }

Tokenizer Tokenizer::whitespace() { return Tokenizer(Kind::kWhitespace, "whitespace"); }

Tokenizer Tokenizer::external(std::string name, Hook hook) {
  if (!hook) throw Error(ErrorCode::kInvalidArgument, "external tokenizer needs a counting hook");
  return Tokenizer(Kind::kExternal, std::move(name), std::move(hook));
}

Tokenizer Tokenizer::from_name(const std::string& name) {
  if (name == "approx_chars") return approx_chars();
  if (name == "whitespace") return whitespace();
  throw Error(ErrorCode::kConfig, "unknown tokenizer '" + name + "'");
}

std::int64_t Tokenizer::count(std::string_view text) const {
  switch (kind_) {
    case Kind::kApproxChars:
      return static_cast<std::int64_t>((text.size() + 3) / 4);
    case Kind::kWhitespace: {
      std::int64_t words = 0;
      bool in_word = false;
      for (unsigned char c : text) {
        const bool space = std::isspace(c) != 0;
        if (!space && !in_word) ++words;
        in_word = !space;
      }
      return words;
    }
    case Kind::kExternal:
      return hook_(text);
  }
  return 0;
}

double CacheModel::effective_prompt_tokens(std::int64_t prompt_tokens,
                                           std::int64_t cached_prompt_tokens) const {
  return static_cast<double>(prompt_tokens - cached_prompt_tokens) +
         hit_cost_factor * static_cast<double>(cached_prompt_tokens);
}

std::size_t common_prefix_length(std::string_view a, std::string_view b) {
  const auto mismatch = std::mismatch(a.begin(), a.begin() + std::min(a.size(), b.size()), b.begin());
  return static_cast<std::size_t>(mismatch.first - a.begin());
}

std::size_t PrefixStore::longest_match(std::string_view prompt) const {
  std::size_t best = 0;
  auto it = prompts_.lower_bound(prompt);
  if (it != prompts_.end()) best = common_prefix_length(prompt, *it);
  if (it != prompts_.begin()) best = std::max(best, common_prefix_length(prompt, *std::prev(it)));
  return best;
}

void PrefixCache::apply(UsageRecord& record, const std::string& backend, const std::string& prompt) {
  if (!model_.enabled) {
    record.cached_prompt_tokens = 0;
    return;
  }
  std::size_t matched = 0;
  {
    std::lock_guard lock(mutex_);
    auto& store = scopes_[{backend, record.agent_id}];
    matched = store.longest_match(prompt);
    store.insert(prompt);
  }
  const auto cached = matched == prompt.size()
                          ? record.prompt_tokens
                          : tokenizer_.count(std::string_view(prompt).substr(0, matched));
  record.cached_prompt_tokens = std::min(cached, record.prompt_tokens);
}

void PrefixCache::reset() {
  std::lock_guard lock(mutex_);
  scopes_.clear();
}

void CostTotals::add(const UsageRecord& record, const CacheModel& model) {
  calls += 1;
  prompt_tokens += record.prompt_tokens;
  completion_tokens += record.completion_tokens;
  cached_prompt_tokens += record.cached_prompt_tokens;
  effective_tokens += model.effective_prompt_tokens(record.prompt_tokens, record.cached_prompt_tokens) +
                      static_cast<double>(record.completion_tokens);
}

void CostTotals::add(const CostTotals& other) {
  calls += other.calls;
  prompt_tokens += other.prompt_tokens;
  completion_tokens += other.completion_tokens;
  cached_prompt_tokens += other.cached_prompt_tokens;
  effective_tokens += other.effective_tokens;
}

CostReport summarize_costs(std::span<const RunTranscript> transcripts) {
  CostReport report;
  std::map<std::tuple<int, Phase, std::string>, CostTotals> rows;
  for (const auto& t : transcripts) {
    report.runs += 1;
    if (t.termination.status == RunStatus::kFailed) report.failed_runs += 1;
    if (t.termination.status == RunStatus::kStopped) {
      report.stop_histogram[t.termination.stop_layer] += 1;
    }
    report.depth_histogram[t.termination.layers_run] += 1;

    const CacheModel model{t.config.prefix_cache, t.config.cache_hit_cost};
    for (const auto& entry : t.ledger) {
      report.overall.add(entry, model);
      report.by_layer[entry.layer].add(entry, model);
      report.by_phase[entry.phase].add(entry, model);
      report.by_layer_phase[{entry.layer, entry.phase}].add(entry, model);
      rows[{entry.layer, entry.phase, entry.agent_id}].add(entry, model);
    }
  }
  report.rows.reserve(rows.size());
  for (auto& [key, totals] : rows) {
    report.rows.push_back(CostRow{std::get<0>(key), std::get<1>(key), std::get<2>(key), totals});
  }
  return report;
}

CostReport summarize_costs(const RunTranscript& transcript) {
  return summarize_costs(std::span<const RunTranscript>(&transcript, 1));
}

namespace {

std::string format_effective(double value) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << value;
  return out.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

nlohmann::json totals_json(const CostTotals& t) {
  return nlohmann::json{{"calls", t.calls},
                        {"prompt_tokens", t.prompt_tokens},
                        {"completion_tokens", t.completion_tokens},
                        {"raw_tokens", t.raw_tokens()},
                        {"cached_prompt_tokens", t.cached_prompt_tokens},
                        {"effective_tokens", t.effective_tokens}};
}

}  // namespace

std::string cost_report_csv(const CostReport& report) {
  std::ostringstream out;
  out << "layer,phase,agent,raw,cached,effective\n";
  for (const auto& row : report.rows) {
    out << row.layer << ',' << to_string(row.phase) << ',' << csv_field(row.agent_id) << ','
        << row.totals.raw_tokens() << ',' << row.totals.cached_prompt_tokens << ','
        << format_effective(row.totals.effective_tokens) << '\n';
  }
  return out.str();
}

nlohmann::json cost_report_json(const CostReport& report) {
  using nlohmann::json;
  json j;
  j["runs"] = report.runs;
  j["failed_runs"] = report.failed_runs;
  j["overall"] = totals_json(report.overall);
  j["by_layer"] = json::array();
  for (const auto& [layer, totals] : report.by_layer) {
    auto row = totals_json(totals);
    row["layer"] = layer;
    j["by_layer"].push_back(row);
  }
  j["by_phase"] = json::array();
  for (const auto& [phase, totals] : report.by_phase) {
    auto row = totals_json(totals);
    row["phase"] = to_string(phase);
    j["by_phase"].push_back(row);
  }
  j["rows"] = json::array();
  for (const auto& r : report.rows) {
    auto row = totals_json(r.totals);
    row["layer"] = r.layer;
    row["phase"] = to_string(r.phase);
    row["agent"] = r.agent_id;
    j["rows"].push_back(row);
  }
  j["stop_histogram"] = json::object();
  for (const auto& [layer, count] : report.stop_histogram) {
    j["stop_histogram"][std::to_string(layer)] = count;
  }
  j["depth_histogram"] = json::object();
  for (const auto& [layer, count] : report.depth_histogram) {
    j["depth_histogram"][std::to_string(layer)] = count;
  }
  return j;
}

}  // namespace amoa
