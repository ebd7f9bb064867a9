#include "amoa/reporting.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <tuple>

namespace amoa {

LoadedTranscripts load_transcript_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  LoadedTranscripts out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorCode::kInvalidArgument, "'" + dir + "' is not a directory");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    try {
      out.transcripts.push_back(read_transcript(path.string()));
    } catch (const std::exception& e) {
      out.warnings.push_back("skipping " + path.string() + ": " + e.what());
    }
  }
  return out;
}

std::string depth_table_csv(const std::vector<RunTranscript>& transcripts) {
  using Key = std::tuple<std::string, std::size_t, int, bool>;
  struct Acc {
    std::int64_t runs = 0;
    std::int64_t stopped = 0;
    CostTotals totals;
  };
  std::map<Key, Acc> groups;
  for (const auto& t : transcripts) {
    if (t.termination.status == RunStatus::kFailed) continue;
    auto& acc = groups[Key{to_string(t.config.attention), t.config.collaborator_count(),
                           t.config.max_depth, t.config.early_stop}];
    ++acc.runs;
    if (t.termination.status == RunStatus::kStopped) ++acc.stopped;
    acc.totals.add(summarize_costs(t).overall);
  }

  std::string csv = "attention,agents,layers,early_stop,runs,stopped,mean_calls,mean_raw,mean_cached,mean_effective\n";
  char buf[256];
  for (const auto& [key, acc] : groups) {
    const auto runs = static_cast<double>(acc.runs);
    std::snprintf(buf, sizeof buf, "%s,%zu,%d,%s,%lld,%lld,%.2f,%.2f,%.2f,%.2f\n",
                  std::get<0>(key).c_str(), std::get<1>(key), std::get<2>(key),
                  std::get<3>(key) ? "true" : "false", static_cast<long long>(acc.runs),
                  static_cast<long long>(acc.stopped), static_cast<double>(acc.totals.calls) / runs,
                  static_cast<double>(acc.totals.raw_tokens()) / runs,
                  static_cast<double>(acc.totals.cached_prompt_tokens) / runs,
                  acc.totals.effective_tokens / runs);
    csv += buf;
  }
  return csv;
}

std::string stop_histogram_csv(const CostReport& report) {
  std::string csv = "stop_layer,runs\n";
  for (const auto& [layer, runs] : report.stop_histogram) {
    csv += std::to_string(layer) + "," + std::to_string(runs) + "\n";
  }
  return csv;
}

}  // namespace amoa
