#include "amoa/judge.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace amoa {

using templates::Verdict;

namespace {

Verdict swap_labels(Verdict v) {
  switch (v) {
    case Verdict::kA: return Verdict::kB;
    case Verdict::kB: return Verdict::kA;
    case Verdict::kTie: return Verdict::kTie;
  }
  return Verdict::kTie;
}

std::string ask(ChatBackend& backend, const AgentSpec& judge, const Tokenizer& tokenizer,
                const CallOptions& call, const std::string& instruction, const std::string& a,
                const std::string& b) {
  ChatRequest request;
  const auto prompt = templates::render_judge(instruction, a, b);
  request.system = prompt.system;
  request.messages.push_back(ChatMessage{ChatRole::kUser, prompt.user});
  request.gen = judge.gen;
  return backend.complete(request, judge.id, tokenizer, call).text;
}

double rate(std::int64_t part, std::size_t total) {
  return total == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(total);
}

}  // namespace

Verdict combine_verdicts(Verdict first, Verdict second) {
  return first == second ? first : Verdict::kTie;
}

double JudgeSummary::win_rate() const { return rate(wins, verdicts.size()); }
double JudgeSummary::tie_rate() const { return rate(ties, verdicts.size()); }
double JudgeSummary::loss_rate() const { return rate(losses, verdicts.size()); }

JudgeVerdict judge_pair(ChatBackend& backend, const AgentSpec& judge, const Tokenizer& tokenizer,
                        const CallOptions& call, const std::string& id,
                        const std::string& instruction, const std::string& answer_a,
                        const std::string& answer_b) {
  JudgeVerdict v;
  v.id = id;
  v.rationale_first = ask(backend, judge, tokenizer, call, instruction, answer_a, answer_b);
  v.rationale_second = ask(backend, judge, tokenizer, call, instruction, answer_b, answer_a);
  v.first = templates::parse_verdict(v.rationale_first).value_or(Verdict::kTie);
  v.second = swap_labels(templates::parse_verdict(v.rationale_second).value_or(Verdict::kTie));
  v.winner = combine_verdicts(v.first, v.second);
  return v;
}

JudgeSummary judge_answers(const std::vector<AnswerEntry>& a, const std::vector<AnswerEntry>& b,
                           ChatBackend& backend, const AgentSpec& judge, const Tokenizer& tokenizer,
                           const JudgeOptions& options) {
  std::map<std::string, const AnswerEntry*> by_id;
  for (const auto& e : b) by_id.emplace(e.id, &e);
  std::vector<std::pair<const AnswerEntry*, const AnswerEntry*>> pairs;
  std::vector<std::string> unpaired;
  for (const auto& e : a) {
    const auto it = by_id.find(e.id);
    if (it == by_id.end()) {
      unpaired.push_back(e.id);
    } else {
      pairs.emplace_back(&e, it->second);
      by_id.erase(it);
    }
  }
  for (const auto& [id, _] : by_id) unpaired.push_back(id);
  if (!unpaired.empty()) {
    std::string list;
    for (const auto& id : unpaired) list += (list.empty() ? "" : ", ") + id;
    throw Error(ErrorCode::kInvalidArgument, "unpaired ids: " + list);
  }

  JudgeSummary summary;
  summary.verdicts.resize(pairs.size());
  std::vector<std::string> errors(pairs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (auto i = next.fetch_add(1); i < pairs.size(); i = next.fetch_add(1)) {
      const auto& [x, y] = pairs[i];
      try {
        summary.verdicts[i] = judge_pair(backend, judge, tokenizer, options.call, x->id,
                                         x->instruction, x->output, y->output);
      } catch (const std::exception& e) {
        errors[i] = x->id + ": " + e.what();
      }
    }
  };
  const auto threads =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(options.parallel, 1)), pairs.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(ErrorCode::kTransport, "judge call failed for " + e);
  }

  for (const auto& v : summary.verdicts) {
    summary.calls += 2;
    switch (v.winner) {
      case Verdict::kA: ++summary.wins; break;
      case Verdict::kB: ++summary.losses; break;
      case Verdict::kTie: ++summary.ties; break;
    }
  }
  return summary;
}

nlohmann::json verdicts_jsonl_line(const JudgeVerdict& v) {
  return nlohmann::json{{"id", v.id},
                        {"first", templates::to_string(v.first)},
                        {"second", templates::to_string(v.second)},
                        {"winner", templates::to_string(v.winner)},
                        {"rationale_first", v.rationale_first},
                        {"rationale_second", v.rationale_second}};
}

nlohmann::json judge_summary_json(const JudgeSummary& s) {
  return nlohmann::json{{"pairs", s.verdicts.size()}, {"calls", s.calls},
                        {"wins", s.wins},             {"ties", s.ties},
                        {"losses", s.losses},         {"win_rate", s.win_rate()},
                        {"tie_rate", s.tie_rate()},   {"loss_rate", s.loss_rate()},
                        {"template_version", templates::kJudgeTemplateVersion}};
}

}  // namespace amoa
