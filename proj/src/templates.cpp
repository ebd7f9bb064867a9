#include "amoa/templates.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

namespace amoa::templates {

namespace {

// Prompt wording below is transcribed verbatim, including its typos.

constexpr std::string_view kSynthesisIntro =
    "You have been provided with a set of responses from various large language models to the "
    "latest user query. Your task is to synthesize these responses into a single, high-quality "
    "response. It is crucial to critically evaluate the information provided in these responses, "
    "recognizing that some of it may be biased or incorrect. Your response should not simply "
    "replicate the given answers but should offer a refined, accurate, and comprehensive reply to "
    "the instruction. Ensure your response is well-structured, coherent, and adheres to the "
    "highest standards of accuracy and reliability.\n"
    "Responses from models:\n";

constexpr std::string_view kPairwiseIntro =
    "You have been provided with the answer of yours and another large language model to the "
    "latest user query. You should compare your answer with the answer of another large language "
    "model, and offer some suggestions with reasons to the answer of another large language model, "
    "if you think there are some parts of your answer that can help the another large language "
    "model to improve its answer's quality.\n\n";

constexpr std::string_view kSinglePassIntro =
    "You have been provided with the answer of yours and other large language models to the "
    "latest user query. You should compare your answer with the answers from other large language "
    "models, and offer some suggestions with reasons to the other answers, if you think there are "
    "some parts of your answer that can help the other large language models to improve their "
    "answers' quality.\n\n";

constexpr std::string_view kSelfIntro =
    "You have been provided with your answer the latest user query. You should reassess your "
    "earlier response to identify any potentially unreasonable or incorrect content, and provide "
    "revision suggestions to improve the rationality and completeness of your answer.\n\n";

constexpr std::string_view kAggregationIntro =
    "You have been provided with your previous answer to the latest user query. You also have been "
    "provided the suggestions from other large language models to your previous answer. You need "
    "to determine whether those suggestions are correct and reasonable. Your task is to integrate "
    "those reasonable suggestions and refine your previous answer to the latest user query.\n\n"
    "Your previous answer is:\n";

constexpr std::string_view kAggregationOutro =
    "Please integrate those reasonable suggestions and refine your previous answer to the latest "
    "user query.";

constexpr std::string_view kResidualIntro =
    "This scenario resembles a multi-round deliberation involving multiple experts. You are given "
    "the responses of the historical discussion rounds to the latest user's query\xC2\xB7 Your task "
    "is to synthesize these responses into a single, high-quality response. It is crucial to "
    "critically evaluate the information provided in these responses, recognizing that some of it "
    "may be biased or incorrect. Your response should not simply replicate the given answers but "
    "should offer a refined, accurate, and comprehensive reply to the instruction. Ensure your "
    "response is well-structured, coherent, and adheres to the highest standards of accuracy and "
    "reliability.\n\n"
    "Responses of historical round:\n";

constexpr std::string_view kCritiquePreamble = "The history of conversation is:\n";
constexpr std::string_view kQueryLabel = "\n\nThe latest user query is:\n";
constexpr std::string_view kPeerSuggestionOutro =
    "Please give your suggestions to the answer of another large language model.";

std::string synthesis_stanza(std::span<const std::string> responses) {
  std::string out(kSynthesisIntro);
  for (std::size_t i = 0; i < responses.size(); ++i) {
    if (i > 0) out += '\n';
    out += "Response from model " + std::to_string(i + 1) + ":\n";
    out += responses[i];
  }
  return out;
}

std::string critique_head(std::string_view intro, const QueryContext& ctx) {
  std::string out(intro);
  out += kCritiquePreamble;
  out += format_history(ctx);
  out += kQueryLabel;
  out += ctx.query();
  return out;
}

}  // namespace

std::string format_history(const QueryContext& ctx) {
  std::string out;
  for (std::size_t i = 0; i < ctx.history().size(); ++i) {
    const auto& turn = ctx.history()[i];
    if (i > 0) out += '\n';
    out += turn.role == ChatRole::kAssistant ? "Assistant: " : "User: ";
    out += turn.content;
  }
  return out;
}

std::string history_and_query(const QueryContext& ctx) {
  if (ctx.history().empty()) return ctx.query();
  return format_history(ctx) + "\n" + ctx.query();
}

RenderedPrompt render_sampling(const QueryContext& ctx,
                               const std::optional<std::string>& prev_layer_output) {
  RenderedPrompt prompt;
  prompt.user = history_and_query(ctx);
  if (prev_layer_output) {
    const std::string slot[] = {*prev_layer_output};
    prompt.system = synthesis_stanza(slot);
  }
  return prompt;
}

std::size_t pairwise_shared_prefix_length(const QueryContext& ctx) {
  return critique_head(kPairwiseIntro, ctx).size() +
         std::string_view("\n\nThe answer of another large language model is:\n").size();
}

RenderedPrompt render_cross_pairwise(const QueryContext& ctx, const std::string& own_answer,
                                     const std::string& other_answer) {
  RenderedPrompt prompt;
  prompt.user = critique_head(kPairwiseIntro, ctx);
  prompt.user += "\n\nThe answer of another large language model is:\n";
  prompt.user += other_answer;
  prompt.user += "\n\nThe answer of yours is:\n";
  prompt.user += own_answer;
  prompt.user += "\n\n";
  prompt.user += kPeerSuggestionOutro;
  return prompt;
}

RenderedPrompt render_cross_singlepass(const QueryContext& ctx, const std::string& own_answer,
                                       std::span<const std::string> peer_answers) {
  if (peer_answers.empty()) {
    throw Error(ErrorCode::kPrecondition, "single-pass critique needs at least one peer answer");
  }
  RenderedPrompt prompt;
  auto& u = prompt.user;
  u = critique_head(kSinglePassIntro, ctx);
  u += "\n\nThe answer of other large language models are:\n";
  for (std::size_t k = 0; k < peer_answers.size(); ++k) {
    if (k > 0) u += '\n';
    u += "Answer from model " + std::to_string(k + 1) + ":\n";
    u += peer_answers[k];
  }
  u += "\n\nThe answer of yours is:\n";
  u += own_answer;
  u += "\n\n";
  u += kSinglePassSchemaIntro;
  u += "\n{\n";
  for (std::size_t k = 0; k < peer_answers.size(); ++k) {
    const auto n = std::to_string(k + 1);
    u += "\"suggestion_for_model_" + n + "\": \"your suggestions for the answer of model " + n + "\"";
    u += k + 1 < peer_answers.size() ? ",\n" : "\n";
  }
  u += "}\n\n";
  u += kPeerSuggestionOutro;
  return prompt;
}

RenderedPrompt render_self_attention(const QueryContext& ctx, const std::string& own_answer) {
  RenderedPrompt prompt;
  prompt.user = critique_head(kSelfIntro, ctx);
  prompt.user += "\n\nYour previous answer is:\n";
  prompt.user += own_answer;
  prompt.user += "\n\nPlease give your suggestions to your previous answer.";
  return prompt;
}

RenderedPrompt render_aggregation(const QueryContext& ctx, const std::string& own_answer,
                                  std::span<const AttentionInstruction> instructions,
                                  std::span<const std::string> roster_ids) {
  if (instructions.empty()) {
    throw Error(ErrorCode::kPrecondition, "aggregation needs at least one instruction");
  }
  if (instructions.size() != roster_ids.size()) {
    throw Error(ErrorCode::kPrecondition,
                "aggregation needs exactly one instruction per roster agent (got " +
                    std::to_string(instructions.size()) + " for " +
                    std::to_string(roster_ids.size()) + " agents)");
  }
  const auto& recipient = instructions.front().recipient_id;
  std::vector<const AttentionInstruction*> ordered(roster_ids.size(), nullptr);
  for (const auto& ins : instructions) {
    check_instruction(ins);
    if (ins.recipient_id != recipient) {
      throw Error(ErrorCode::kPrecondition, "instructions address different recipients");
    }
    const auto pos = std::find(roster_ids.begin(), roster_ids.end(), ins.advisor_id);
    if (pos == roster_ids.end()) {
      throw Error(ErrorCode::kPrecondition, "instruction from unknown advisor '" + ins.advisor_id + "'");
    }
    auto& slot = ordered[static_cast<std::size_t>(pos - roster_ids.begin())];
    if (slot != nullptr) {
      throw Error(ErrorCode::kPrecondition, "duplicate instruction from '" + ins.advisor_id + "'");
    }
    slot = &ins;
  }
  if (std::find(roster_ids.begin(), roster_ids.end(), recipient) == roster_ids.end()) {
    throw Error(ErrorCode::kPrecondition, "missing self-instruction for '" + recipient + "'");
  }

  RenderedPrompt prompt;
  std::string system(kAggregationIntro);
  system += own_answer;
  system += "\n\nBelows are the suggestions from other large language models to your previous answer:\n";
  for (std::size_t k = 0; k < ordered.size(); ++k) {
    system += "Suggestions from model " + std::to_string(k + 1) + ":\n";
    system += ordered[k]->text;
    system += "\n\n";
  }
  system += kAggregationOutro;
  prompt.system = std::move(system);
  prompt.user = history_and_query(ctx);
  return prompt;
}

RenderedPrompt render_summarization(const QueryContext& ctx,
                                    std::span<const std::string> refined_responses) {
  if (refined_responses.size() < 2) {
    throw Error(ErrorCode::kPrecondition, "summarization needs at least two refined responses");
  }
  RenderedPrompt prompt;
  prompt.system = synthesis_stanza(refined_responses);
  prompt.user = history_and_query(ctx);
  return prompt;
}

RenderedPrompt render_residual(const QueryContext& ctx, const HistoryStack& stack, bool es_enabled) {
  if (stack.size() < 2) {
    throw Error(ErrorCode::kPrecondition, "residual synthesis needs a history of at least two rounds");
  }
  std::string system(kResidualIntro);
  for (std::size_t i = 0; i < stack.entries.size(); ++i) {
    if (i > 0) system += '\n';
    system += std::string(kResidualRoundLabel) + std::to_string(i + 1) + ":\n";
    system += stack.entries[i].text;
  }
  if (es_enabled) {
    system += "\n\n";
    system += kStopClause;
  }
  RenderedPrompt prompt;
  prompt.system = std::move(system);
  prompt.user = history_and_query(ctx);
  return prompt;
}

namespace {

// End of the balanced {...} starting at `open`, honouring JSON strings.
std::optional<std::size_t> matching_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::nullopt;
}

}  // namespace

SuggestionMap parse_singlepass(std::string_view text) {
  constexpr std::string_view kKeyPrefix = "suggestion_for_model_";
  for (auto open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    const auto close = matching_brace(text, open);
    if (!close) continue;
    const auto parsed = nlohmann::json::parse(text.substr(open, *close - open + 1), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) continue;

    SuggestionMap map;
    for (const auto& [key, value] : parsed.items()) {
      if (key.rfind(kKeyPrefix, 0) != 0) continue;
      const auto digits = std::string_view(key).substr(kKeyPrefix.size());
      if (digits.empty() || digits.size() > 6 ||
          !std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c) != 0; })) {
        continue;
      }
      const int index = std::stoi(std::string(digits));
      if (index < 1) continue;
      map[index] = value.is_string() ? value.get<std::string>() : value.dump();
    }
    return map;
  }
  throw Error(ErrorCode::kMalformed, "no JSON object found in single-pass critique");
}

std::string singlepass_reask_message() {
  return "Your previous reply could not be parsed. Reply with only the JSON object described "
         "above, with one \"suggestion_for_model_<k>\" key per answer.";
}

bool detect_stop_sentinel(std::string_view text) {
  std::string normalized;
  normalized.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (c == '*') continue;
    if (std::isspace(c) != 0) {
      pending_space = true;
      continue;
    }
    if (pending_space && !normalized.empty()) normalized += ' ';
    pending_space = false;
    normalized += static_cast<char>(std::tolower(c));
  }
  return normalized.find("attention-moa should be stopped") != std::string::npos;
}

RenderedPrompt render_judge(const std::string& instruction, const std::string& answer_a,
                            const std::string& answer_b) {
  RenderedPrompt prompt;
  prompt.system =
      "Please act as an impartial judge and evaluate the quality of the two answers to the user "
      "instruction shown below. Choose the answer that follows the instruction and answers it "
      "better, considering helpfulness, correctness, depth, and clarity. Do not let the order in "
      "which the answers are presented or their length alone influence your decision. After a "
      "short explanation, output your final verdict on the last line as exactly one of: [[A]] if "
      "answer A is better, [[B]] if answer B is better, [[tie]] if they are equally good.";
  std::string user = "[Instruction]\n" + instruction + "\n\n";
  user += kJudgeAnswerAOpen;
  user += answer_a;
  user += kJudgeAnswerAClose;
  user += "\n\n";
  user += kJudgeAnswerBOpen;
  user += answer_b;
  user += kJudgeAnswerBClose;
  prompt.user = std::move(user);
  return prompt;
}

const char* to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::kA: return "A";
    case Verdict::kB: return "B";
    case Verdict::kTie: return "tie";
  }
  return "tie";
}

std::optional<Verdict> parse_verdict(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::optional<Verdict> verdict;
  std::size_t best = 0;
  for (auto [marker, v] : {std::pair{"[[a]]", Verdict::kA}, std::pair{"[[b]]", Verdict::kB},
                           std::pair{"[[tie]]", Verdict::kTie}}) {
    const auto pos = lower.rfind(marker);
    if (pos != std::string::npos && (!verdict || pos >= best)) {
      verdict = v;
      best = pos;
    }
  }
  return verdict;
}

}  // namespace amoa::templates
