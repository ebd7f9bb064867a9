#include "amoa/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "amoa/accounting.hpp"

namespace amoa {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParse, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) {
    throw Error(ErrorCode::kWriteFailure, "cannot write '" + path.string() + "'");
  }
}

template <typename F>
void for_each_json_line(const std::string& text, F&& f) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(number) + ": not a JSON object");
    }
    try {
      f(doc, number);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(number) + ": " + e.what());
    }
  }
}

std::string id_of(const json& doc, int line) {
  if (!doc.contains("id")) throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": missing id");
  const auto& id = doc.at("id");
  std::string s;
  if (id.is_string()) s = id.get<std::string>();
  else if (id.is_number_integer()) s = std::to_string(id.get<long long>());
  else throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": id must be a string or integer");
  const bool safe = !s.empty() && s != "." && s != ".." &&
                    std::all_of(s.begin(), s.end(), [](char c) {
                      return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
                    });
  if (!safe) throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": unusable id '" + s + "'");
  return s;
}

void check_unique(std::set<std::string>& seen, const std::string& id, int line) {
  if (!seen.insert(id).second) {
    throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": duplicate id '" + id + "'");
  }
}

}  // namespace

std::vector<DatasetEntry> parse_dataset(const std::string& text) {
  std::vector<DatasetEntry> entries;
  std::set<std::string> seen;
  for_each_json_line(text, [&](const json& doc, int line) {
    DatasetEntry e;
    e.id = id_of(doc, line);
    check_unique(seen, e.id, line);
    e.instruction = doc.at("instruction").get<std::string>();
    if (doc.contains("reference") && !doc.at("reference").is_null()) {
      e.reference = doc.at("reference").get<std::string>();
    }
    entries.push_back(std::move(e));
  });
  return entries;
}

std::vector<DatasetEntry> load_dataset(const std::string& path) {
  try {
    return parse_dataset(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

std::vector<AnswerEntry> parse_answers(const std::string& text) {
  std::vector<AnswerEntry> answers;
  std::set<std::string> seen;
  for_each_json_line(text, [&](const json& doc, int line) {
    AnswerEntry a;
    a.id = id_of(doc, line);
    check_unique(seen, a.id, line);
    a.instruction = doc.at("instruction").get<std::string>();
    a.output = doc.at("output").get<std::string>();
    answers.push_back(std::move(a));
  });
  return answers;
}

std::vector<AnswerEntry> load_answers(const std::string& path) {
  try {
    return parse_answers(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

std::string answers_jsonl(const std::vector<AnswerEntry>& answers) {
  std::string out;
  for (const auto& a : answers) {
    out += json{{"id", a.id}, {"instruction", a.instruction}, {"output", a.output}}.dump();
    out += '\n';
  }
  return out;
}

DatasetResult run_dataset(const Pipeline& pipeline, const std::vector<DatasetEntry>& entries,
                          int parallel) {
  std::vector<RunTranscript> transcripts(entries.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (auto i = next.fetch_add(1); i < entries.size(); i = next.fetch_add(1)) {
      try {
        transcripts[i] = pipeline.run(QueryContext({}, entries[i].instruction));
      } catch (const std::exception& e) {
        transcripts[i] = RunTranscript{};
        transcripts[i].config = snapshot(pipeline.config());
        transcripts[i].termination.status = RunStatus::kFailed;
        transcripts[i].termination.error = e.what();
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(parallel, 1)), entries.size());
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();

  DatasetResult result;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (transcripts[i].termination.status == RunStatus::kFailed) {
      result.failed_ids.push_back(entries[i].id);
    } else {
      result.answers.push_back(AnswerEntry{entries[i].id, entries[i].instruction, transcripts[i].final_output});
    }
  }
  result.transcripts = std::move(transcripts);
  return result;
}

void write_dataset_outputs(const std::string& dir, const std::vector<DatasetEntry>& entries,
                           const DatasetResult& result) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root / "transcripts", ec);
  if (ec) throw Error(ErrorCode::kWriteFailure, "cannot create '" + (root / "transcripts").string() + "'");

  for (std::size_t i = 0; i < entries.size(); ++i) {
    write_transcript((root / "transcripts" / (entries[i].id + ".json")).string(), result.transcripts[i]);
  }
  write_file(root / "answers.jsonl", answers_jsonl(result.answers));

  const auto report = summarize_costs(result.transcripts);
  auto doc = cost_report_json(report);
  doc["failed_ids"] = result.failed_ids;
  write_file(root / "report.json", doc.dump(2) + "\n");
  write_file(root / "cost.csv", cost_report_csv(report));
}

}  // namespace amoa
