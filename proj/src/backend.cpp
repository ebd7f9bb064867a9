#include "amoa/backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

namespace amoa {

void validate_request(const ChatRequest& request) {
  if (request.messages.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "chat request has no messages");
  }
  for (const auto& m : request.messages) {
    if (m.role == ChatRole::kSystem) {
      throw Error(ErrorCode::kInvalidArgument, "system text belongs in ChatRequest::system");
    }
  }
  if (request.messages.back().role != ChatRole::kUser) {
    throw Error(ErrorCode::kInvalidArgument, "last chat message must come from the user");
  }
}

std::string flatten_prompt(const ChatRequest& request) {
  std::string out;
  if (request.system) out = *request.system;
  for (const auto& m : request.messages) {
    if (!out.empty()) out += "\n\n";
    out += m.content;
  }
  return out;
}

std::chrono::milliseconds RetryPolicy::backoff_for(int retry, double unit_random) const {
  const double base = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, retry);
  const double capped = std::min(base, static_cast<double>(max_backoff.count()));
  const double scale = 1.0 + jitter * (2.0 * std::clamp(unit_random, 0.0, 1.0) - 1.0);
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::max(0.0, capped * scale)));
}

ChatBackend::ChatBackend(std::string name, std::size_t max_in_flight)
    : name_(std::move(name)),
      max_in_flight_(std::max<std::size_t>(1, max_in_flight)),
      slots_(static_cast<std::ptrdiff_t>(max_in_flight_)) {}

namespace {

class SlotGuard {
 public:
  SlotGuard(std::counting_semaphore<>& slots, std::atomic<std::size_t>& in_flight,
            std::atomic<std::size_t>& peak)
      : slots_(slots), in_flight_(in_flight) {
    slots_.acquire();
    const auto now = in_flight_.fetch_add(1) + 1;
    auto seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
  }
  ~SlotGuard() {
    in_flight_.fetch_sub(1);
    slots_.release();
  }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<>& slots_;
  std::atomic<std::size_t>& in_flight_;
};

double jitter_draw() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace

ChatResult ChatBackend::complete(const ChatRequest& request, const std::string& agent_id,
                                 const Tokenizer& tokenizer, const CallOptions& options) {
  validate_request(request);
  const auto prompt_tokens = tokenizer.count(flatten_prompt(request));

  ChatResult result;
  for (int attempt = 0;; ++attempt) {
    try {
      RawCompletion raw;
      {
        SlotGuard guard(slots_, in_flight_, peak_in_flight_);
        raw = complete_once(request, agent_id, options.timeout);
      }
      if (raw.text.empty()) {
        throw BackendError(ErrorCode::kEmptyCompletion,
                           "backend '" + name_ + "' returned an empty completion for agent '" +
                               agent_id + "'",
                           false);
      }
      result.text = std::move(raw.text);
      result.reported_usage = raw.reported_usage;
      result.measured_usage = TokenUsage{prompt_tokens, tokenizer.count(result.text)};
      result.attempts = attempt + 1;
      return result;
    } catch (const BackendError& e) {
      if (!e.transient() || attempt >= options.retry.max_retries) throw;
      result.failed_prompt_tokens += prompt_tokens;
      std::this_thread::sleep_for(options.retry.backoff_for(attempt, jitter_draw()));
    }
  }
}

RawCompletion ScriptedBackend::complete_once(const ChatRequest& request, const std::string& agent_id,
                                             std::chrono::milliseconds /*timeout*/) {
  return script_(request, agent_id);
}

std::shared_ptr<ChatBackend> make_backend(const BackendSpec& spec) {
  switch (spec.kind) {
    case BackendSpec::Kind::kMock:
      return std::make_shared<MockBackend>(spec.name, spec.mock, spec.max_in_flight);
    case BackendSpec::Kind::kReplay:
      return std::make_shared<ReplayBackend>(spec.name, FixtureStore::load(spec.fixture_path),
                                             spec.max_in_flight);
    case BackendSpec::Kind::kHttp: {
      std::string token;
      if (!spec.auth_env.empty()) {
        const char* value = std::getenv(spec.auth_env.c_str());
        if (value == nullptr) {
          throw Error(ErrorCode::kConfig, "backend '" + spec.name + "': environment variable " +
                                              spec.auth_env + " is not set");
        }
        token = value;
      }
      return std::make_shared<HttpBackend>(spec.name, spec.base_url, spec.model, std::move(token),
                                           spec.max_in_flight);
    }
  }
  throw Error(ErrorCode::kConfig, "unknown backend kind");
}

}  // namespace amoa
