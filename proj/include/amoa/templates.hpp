#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "amoa/model.hpp"

namespace amoa::templates {

/// A prompt ready to be sent: optional system prompt plus one user message.
struct RenderedPrompt {
  std::optional<std::string> system;
  std::string user;
  /// Filled by accounting after issue; 0 when unknown.
  std::size_t shared_prefix_len = 0;

  bool operator==(const RenderedPrompt&) const = default;
};

/// 1-based peer number (as printed in the single-pass prompt) -> suggestion.
using SuggestionMap = std::map<int, std::string>;

// Fixed phrases other modules (and the mock backend) key on.
inline constexpr std::string_view kStopSentinel = "Attention-MoA should be stopped";
inline constexpr std::string_view kSinglePassSchemaIntro = "The output should be a JSON object as:";
inline constexpr std::string_view kResidualRoundLabel = "Response of historical round ";
inline constexpr std::string_view kStopClause =
    "If, in your judgment, the latest round\xE2\x80\x99s results exhibit no improvement over "
    "those of the preceding round, you should output **Attention-MoA should be stopped** only.";

/// {conv_history}: one "User: ..." / "Assistant: ..." line per turn.
std::string format_history(const QueryContext& ctx);

/// The user prompt shared by sampling, aggregation, summarization, and
/// residual synthesis: {conv_history}\n{user_query}, or just the query when
/// the history is empty.
std::string history_and_query(const QueryContext& ctx);

/// Layer 1 (no previous output): no system prompt, bare query. Later layers:
/// the synthesis system prompt with exactly one response slot.
RenderedPrompt render_sampling(const QueryContext& ctx,
                               const std::optional<std::string>& prev_layer_output);

RenderedPrompt render_cross_pairwise(const QueryContext& ctx, const std::string& own_answer,
                                     const std::string& other_answer);

/// Byte length of the part of a pairwise critique prompt that precedes the
/// other model's answer; identical for all of one advisor's critiques.
std::size_t pairwise_shared_prefix_length(const QueryContext& ctx);

/// Peers are numbered 1..k in the order given. Throws Error(kPrecondition)
/// with no peers.
RenderedPrompt render_cross_singlepass(const QueryContext& ctx, const std::string& own_answer,
                                       std::span<const std::string> peer_answers);

RenderedPrompt render_self_attention(const QueryContext& ctx, const std::string& own_answer);

/// One suggestion block per collaborator, labelled by its 1-based roster
/// position. `roster_ids` fixes the order; `instructions` may arrive in any
/// order but must hold exactly one instruction from each roster id, all
/// addressed to the same recipient.
RenderedPrompt render_aggregation(const QueryContext& ctx, const std::string& own_answer,
                                  std::span<const AttentionInstruction> instructions,
                                  std::span<const std::string> roster_ids);

/// The synthesis system stanza over all refined responses. Needs >= 2.
RenderedPrompt render_summarization(const QueryContext& ctx,
                                    std::span<const std::string> refined_responses);

/// Rounds oldest first; the early-stop variant appends kStopClause. Needs a
/// stack of at least two entries.
RenderedPrompt render_residual(const QueryContext& ctx, const HistoryStack& stack,
                               bool es_enabled);

/// Extracts the first parsable JSON object (surrounding prose and code fences
/// allowed); keys "suggestion_for_model_<k>" map to k. Throws
/// Error(kMalformed) when no object parses.
SuggestionMap parse_singlepass(std::string_view text);

/// Follow-up turn used once when a single-pass critique cannot be parsed.
std::string singlepass_reask_message();

/// True iff the text, lower-cased with asterisks removed and whitespace runs
/// collapsed, contains "attention-moa should be stopped".
bool detect_stop_sentinel(std::string_view text);

// ---------------------------------------------------------------------------
// Pairwise judging (engine-owned template, not part of the pipeline)
// ---------------------------------------------------------------------------

inline constexpr int kJudgeTemplateVersion = 1;
inline constexpr std::string_view kJudgeAnswerAOpen = "[Answer A]\n";
inline constexpr std::string_view kJudgeAnswerAClose = "\n[End of Answer A]";
inline constexpr std::string_view kJudgeAnswerBOpen = "[Answer B]\n";
inline constexpr std::string_view kJudgeAnswerBClose = "\n[End of Answer B]";

RenderedPrompt render_judge(const std::string& instruction, const std::string& answer_a,
                            const std::string& answer_b);

enum class Verdict { kA, kB, kTie };

const char* to_string(Verdict verdict);

/// Last "[[A]]", "[[B]]" or "[[tie]]" marker in the completion (case
/// insensitive); nullopt when there is none.
std::optional<Verdict> parse_verdict(std::string_view text);

}  // namespace amoa::templates
