#pragma once

#include <optional>
#include <string>
#include <vector>

#include "amoa/pipeline.hpp"
#include "amoa/transcript.hpp"

namespace amoa {

struct DatasetEntry {
  std::string id;
  std::string instruction;
  std::optional<std::string> reference;
};

/// A system's answer to one dataset entry.
struct AnswerEntry {
  std::string id;
  std::string instruction;
  std::string output;
};

/// JSON Lines, one {id, instruction, reference?} per line; blank lines are
/// skipped. Numeric ids are accepted and kept as their decimal text. Ids must
/// be unique and usable as file names. Throws Error(kParse).
std::vector<DatasetEntry> parse_dataset(const std::string& text);
std::vector<DatasetEntry> load_dataset(const std::string& path);

/// JSON Lines of {id, instruction, output}.
std::vector<AnswerEntry> parse_answers(const std::string& text);
std::vector<AnswerEntry> load_answers(const std::string& path);
std::string answers_jsonl(const std::vector<AnswerEntry>& answers);

struct DatasetResult {
  std::vector<RunTranscript> transcripts;  // dataset order
  std::vector<std::string> failed_ids;
  std::vector<AnswerEntry> answers;        // successful entries only
};

/// Runs every entry through the pipeline with at most `parallel` runs in
/// flight. Entry failures are recorded and do not stop the others.
DatasetResult run_dataset(const Pipeline& pipeline, const std::vector<DatasetEntry>& entries,
                          int parallel);

/// transcripts/<id>.json, answers.jsonl, report.json, cost.csv under `dir`.
void write_dataset_outputs(const std::string& dir, const std::vector<DatasetEntry>& entries,
                           const DatasetResult& result);

}  // namespace amoa
