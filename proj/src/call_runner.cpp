#include "amoa/call_runner.hpp"

#include <exception>
#include <future>

namespace amoa {

ChatRequest make_request(const templates::RenderedPrompt& prompt, const GenParams& gen) {
  ChatRequest request;
  request.system = prompt.system;
  request.messages.push_back(ChatMessage{ChatRole::kUser, prompt.user});
  request.gen = gen;
  return request;
}

CallRunner::CallRunner(const BackendRegistry& backends, Tokenizer tokenizer, CallOptions options,
                       CacheModel cache_model)
    : backends_(backends),
      tokenizer_(tokenizer),
      options_(options),
      cache_(cache_model, std::move(tokenizer)) {}

void CallRunner::bind(RunTranscript* transcript, LayerTrace* layer) {
  transcript_ = transcript;
  layer_ = layer;
}

ChatBackend& CallRunner::backend_for(const AgentSpec& agent) const {
  const auto it = backends_.find(agent.backend);
  if (it == backends_.end() || !it->second) {
    throw Error(ErrorCode::kConfig,
                "agent '" + agent.id + "' is bound to unknown backend '" + agent.backend + "'");
  }
  return *it->second;
}

std::vector<CallOutcome> CallRunner::run_batch(std::span<const PlannedCall> calls) {
  if (transcript_ == nullptr || layer_ == nullptr) {
    throw Error(ErrorCode::kPrecondition, "CallRunner has no transcript bound");
  }
  if (deadline_ && Clock::now() >= *deadline_) {
    const auto& first = calls.empty() ? PlannedCall{} : calls.front();
    throw StageError(ErrorCode::kDeadlineExceeded, first.phase, first.layer,
                     first.agent ? first.agent->id : "", "run deadline exceeded");
  }

  std::vector<std::future<ChatResult>> pending;
  pending.reserve(calls.size());
  for (const auto& call : calls) {
    pending.push_back(std::async(std::launch::async, [this, &call]() {
      return backend_for(*call.agent).complete(call.request, call.agent->id, tokenizer_, options_);
    }));
  }

  std::vector<CallOutcome> outcomes(calls.size());
  std::exception_ptr first_error;
  std::size_t first_error_index = 0;
  for (std::size_t i = 0; i < calls.size(); ++i) {
    const auto& call = calls[i];
    ChatResult result;
    try {
      result = pending[i].get();
    } catch (...) {
      if (!first_error) {
        first_error = std::current_exception();
        first_error_index = i;
      }
      continue;
    }

    UsageRecord usage;
    usage.call_id = transcript_->ledger.size();
    usage.phase = call.phase;
    usage.layer = call.layer;
    usage.agent_id = call.agent->id;
    usage.prompt_tokens = result.measured_usage.prompt_tokens;
    usage.completion_tokens = result.measured_usage.completion_tokens;
    cache_.apply(usage, call.agent->backend, flatten_prompt(call.request));

    CallRecord record;
    record.call_id = usage.call_id;
    record.phase = call.phase;
    record.layer = call.layer;
    record.agent_id = call.agent->id;
    record.backend = call.agent->backend;
    record.target = call.target;
    record.system = call.request.system;
    record.messages = call.request.messages;
    record.completion = result.text;
    record.reported_usage = result.reported_usage;
    record.attempts = result.attempts;

    transcript_->diagnostics.failed_attempts += result.attempts - 1;
    transcript_->diagnostics.failed_prompt_tokens += result.failed_prompt_tokens;
    transcript_->ledger.push_back(usage);
    layer_->calls.push_back(std::move(record));
    outcomes[i] = CallOutcome{usage.call_id, std::move(result.text)};
  }

  if (first_error) {
    const auto& call = calls[first_error_index];
    try {
      std::rethrow_exception(first_error);
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(e.code(), call.phase, call.layer, call.agent->id, e.what());
    } catch (const std::exception& e) {
      throw StageError(ErrorCode::kTransport, call.phase, call.layer, call.agent->id, e.what());
    }
  }
  return outcomes;
}

CallOutcome CallRunner::run_one(const PlannedCall& call) {
  return run_batch(std::span<const PlannedCall>(&call, 1)).front();
}

}  // namespace amoa
