#include <algorithm>
#include <cmath>
#include <random>
#include <cctype>
#include <thread>

#include "amoa/backend.hpp"
#include "amoa/digest.hpp"
#include "amoa/templates.hpp"

namespace amoa {

namespace {

constexpr std::array<std::string_view, 64> kVocabulary = {
    "analysis", "answer",   "approach", "argument",  "aspect",    "balance",  "careful",  "claim",
    "clarity",  "concise",  "context",  "correct",   "critical",  "detail",   "direct",   "evidence",
    "example",  "factual",  "focus",    "framework", "general",   "given",    "helpful",  "important",
    "include",  "insight",  "issue",    "key",       "logic",     "method",   "model",    "more",
    "note",     "overall",  "point",    "precise",   "problem",   "question", "reason",   "refine",
    "relevant", "result",   "review",   "section",   "should",    "source",   "specific", "step",
    "strong",   "structure", "suggest", "summary",   "support",   "the",      "this",     "thorough",
    "topic",    "useful",   "valid",    "view",      "weak",      "while",    "with",     "yields",
};

/// Portable draws from a standard engine (distributions in <random> are not
/// specified bit-exactly across standard libraries).
class DrawSource {
 public:
  explicit DrawSource(std::uint64_t seed) : engine_(seed) {}

  double unit_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  // Irwin-Hall approximation: only IEEE additions, so bit-identical everywhere.
  double normal() {
    double sum = 0.0;
    for (int i = 0; i < 12; ++i) sum += unit_open();
    return sum - 6.0;
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t seed_from_digest(const std::array<std::uint8_t, 32>& digest) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(digest[i]) << (8 * i);
  return v;
}

std::array<std::uint8_t, 32> call_digest(std::uint64_t seed, const std::string& agent_id,
                                         const std::string& prompt) {
  std::string material;
  material.reserve(prompt.size() + agent_id.size() + 24);
  for (int i = 0; i < 8; ++i) material += static_cast<char>((seed >> (8 * i)) & 0xff);
  material += '\0';
  material += agent_id;
  material += '\0';
  material += prompt;
  return sha256(material);
}

int draw_length(DrawSource& draws, const LengthModel& model, int max_output_tokens) {
  const double raw = model.mean_tokens + model.stddev_tokens * draws.normal();
  const int tokens = static_cast<int>(std::lround(raw));
  return std::clamp(tokens, std::max(1, model.min_tokens), std::max(1, max_output_tokens));
}

// Sentences of plain vocabulary words until ~4 bytes per requested token.
std::string prose(DrawSource& draws, int tokens) {
  const std::size_t target = static_cast<std::size_t>(tokens) * 4;
  std::string out;
  std::size_t words_in_sentence = 0;
  std::size_t sentence_len = 6 + draws.below(10);
  while (out.size() < target) {
    std::string word(kVocabulary[draws.below(kVocabulary.size())]);
    if (words_in_sentence == 0) {
      word[0] = static_cast<char>(word[0] - 'a' + 'A');
      if (!out.empty()) out += ' ';
    } else {
      out += ' ';
    }
    out += word;
    if (++words_in_sentence == sentence_len) {
      out += '.';
      words_in_sentence = 0;
      sentence_len = 6 + draws.below(10);
    }
  }
  if (words_in_sentence != 0) out += '.';
  return out;
}

std::optional<std::string> between(const std::string& text, std::string_view open,
                                   std::string_view close) {
  const auto a = text.find(open);
  if (a == std::string::npos) return std::nullopt;
  const auto start = a + open.size();
  const auto b = text.find(close, start);
  if (b == std::string::npos) return std::nullopt;
  return text.substr(start, b - start);
}

std::string singlepass_reply(DrawSource& draws, const std::string& prompt, int tokens) {
  const auto schema = prompt.rfind(templates::kSinglePassSchemaIntro);
  constexpr std::string_view kKey = "\"suggestion_for_model_";
  std::vector<std::string> keys;
  for (auto pos = prompt.find(kKey, schema); pos != std::string::npos;
       pos = prompt.find(kKey, pos + 1)) {
    auto end = pos + kKey.size();
    while (end < prompt.size() && std::isdigit(static_cast<unsigned char>(prompt[end])) != 0) ++end;
    if (end == pos + kKey.size() || end >= prompt.size() || prompt[end] != '"') continue;
    auto key = prompt.substr(pos, end - pos + 1);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(std::move(key));
  }
  std::string out = "{\n";
  const int per_key = std::max(1, tokens / std::max<int>(1, static_cast<int>(keys.size())));
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out += "  " + keys[i] + ": \"" + prose(draws, per_key) + "\"";
    out += i + 1 < keys.size() ? ",\n" : "\n";
  }
  out += "}";
  return out;
}

std::size_t count_occurrences(const std::string& text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

int scripted_stop_layer(const std::string& prompt, const MockOptions& options) {
  const auto pos = prompt.find(kMockStopDirective);
  if (pos != std::string::npos) {
    const auto start = pos + std::string_view(kMockStopDirective).size();
    const auto end = prompt.find(">>", start);
    if (end != std::string::npos && end > start) {
      try {
        return std::stoi(prompt.substr(start, end - start));
      } catch (const std::exception&) {
      }
    }
  }
  return options.stop_at_layer;
}

std::string judge_reply(DrawSource& draws, const std::string& prompt, const MockOptions& options,
                        const std::array<std::uint8_t, 32>& digest) {
  const auto a = between(prompt, templates::kJudgeAnswerAOpen, templates::kJudgeAnswerAClose);
  const auto b = between(prompt, templates::kJudgeAnswerBOpen, templates::kJudgeAnswerBClose);
  std::string verdict = "[[tie]]";
  switch (options.judge) {
    case JudgePolicy::kFirst:
      verdict = "[[A]]";
      break;
    case JudgePolicy::kLonger:
      if (a && b && a->size() != b->size()) verdict = a->size() > b->size() ? "[[A]]" : "[[B]]";
      break;
    case JudgePolicy::kHash: {
      const int pick = digest[8] % 3;
      verdict = pick == 0 ? "[[A]]" : pick == 1 ? "[[B]]" : "[[tie]]";
      break;
    }
  }
  return prose(draws, 24) + "\n" + verdict;
}

}  // namespace

const char* to_string(JudgePolicy policy) {
  switch (policy) {
    case JudgePolicy::kHash: return "hash";
    case JudgePolicy::kLonger: return "longer";
    case JudgePolicy::kFirst: return "first";
  }
  return "hash";
}

JudgePolicy judge_policy_from_string(const std::string& s) {
  if (s == "hash") return JudgePolicy::kHash;
  if (s == "longer") return JudgePolicy::kLonger;
  if (s == "first") return JudgePolicy::kFirst;
  throw Error(ErrorCode::kConfig, "unknown judge policy '" + s + "'");
}

std::string mock_complete(std::uint64_t seed, const std::string& agent_id,
                          const std::string& rendered_prompt, const MockOptions& options,
                          int max_output_tokens) {
  const auto digest = call_digest(seed, agent_id, rendered_prompt);
  DrawSource draws(seed_from_digest(digest));

  if (rendered_prompt.find(templates::kJudgeAnswerAOpen) != std::string::npos &&
      rendered_prompt.find(templates::kJudgeAnswerBOpen) != std::string::npos) {
    return judge_reply(draws, rendered_prompt, options, digest);
  }

  if (rendered_prompt.find(templates::kStopClause) != std::string::npos) {
    const int stop_at = scripted_stop_layer(rendered_prompt, options);
    const auto rounds = count_occurrences(rendered_prompt, templates::kResidualRoundLabel);
    if (stop_at > 0 && rounds >= static_cast<std::size_t>(stop_at)) {
      return "**" + std::string(templates::kStopSentinel) + "**";
    }
  }

  const int tokens = draw_length(draws, options.length, max_output_tokens);
  if (rendered_prompt.find(templates::kSinglePassSchemaIntro) != std::string::npos) {
    return singlepass_reply(draws, rendered_prompt, tokens);
  }
  return prose(draws, tokens);
}

RawCompletion MockBackend::complete_once(const ChatRequest& request, const std::string& agent_id,
                                         std::chrono::milliseconds /*timeout*/) {
  const auto prompt = flatten_prompt(request);
  if (options_.max_latency.count() > 0) {
    const auto digest = call_digest(options_.seed ^ 0x9e3779b97f4a7c15ULL, agent_id, prompt);
    const auto span = static_cast<std::uint64_t>(options_.max_latency.count()) + 1;
    std::this_thread::sleep_for(std::chrono::milliseconds(seed_from_digest(digest) % span));
  }
  return RawCompletion{mock_complete(options_.seed, agent_id, prompt, options_,
                                     request.gen.max_output_tokens),
                       std::nullopt};
}

}  // namespace amoa
