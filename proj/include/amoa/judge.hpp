#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amoa/backend.hpp"
#include "amoa/dataset.hpp"
#include "amoa/templates.hpp"

namespace amoa {

/// Outcome of judging one pair twice. `first` is the verdict with the
/// answers in file order; `second` is the position-swapped rematch, already
/// mapped back to file labels. Unreadable verdicts count as ties.
struct JudgeVerdict {
  std::string id;
  templates::Verdict first = templates::Verdict::kTie;
  templates::Verdict second = templates::Verdict::kTie;
  templates::Verdict winner = templates::Verdict::kTie;
  std::string rationale_first;
  std::string rationale_second;
};

/// A wins only if both orderings say so, likewise B; anything else is a tie.
templates::Verdict combine_verdicts(templates::Verdict first, templates::Verdict second);

struct JudgeSummary {
  std::vector<JudgeVerdict> verdicts;
  std::int64_t wins = 0;    // A
  std::int64_t ties = 0;
  std::int64_t losses = 0;  // B
  std::int64_t calls = 0;

  double win_rate() const;
  double tie_rate() const;
  double loss_rate() const;
};

struct JudgeOptions {
  CallOptions call;
  int parallel = 4;
};

JudgeVerdict judge_pair(ChatBackend& backend, const AgentSpec& judge, const Tokenizer& tokenizer,
                        const CallOptions& call, const std::string& id,
                        const std::string& instruction, const std::string& answer_a,
                        const std::string& answer_b);

/// Pairs by id in the order of `a`. Throws Error(kInvalidArgument) listing
/// ids present in only one file.
JudgeSummary judge_answers(const std::vector<AnswerEntry>& a, const std::vector<AnswerEntry>& b,
                           ChatBackend& backend, const AgentSpec& judge, const Tokenizer& tokenizer,
                           const JudgeOptions& options);

nlohmann::json verdicts_jsonl_line(const JudgeVerdict& verdict);
nlohmann::json judge_summary_json(const JudgeSummary& summary);

}  // namespace amoa
