#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amoa/accounting.hpp"
#include "amoa/error.hpp"
#include "amoa/model.hpp"

namespace amoa {

// ---------------------------------------------------------------------------
// Requests and results
// ---------------------------------------------------------------------------

struct ChatRequest {
  std::optional<std::string> system;
  std::vector<ChatMessage> messages;
  GenParams gen;

  bool operator==(const ChatRequest&) const = default;
};

/// Throws Error(kInvalidArgument) unless messages are non-empty, contain no
/// system turns, and end with a user turn.
void validate_request(const ChatRequest& request);

/// The single string a request is counted, cached, and mock-hashed by: the
/// system prompt (if any) followed by every message content, joined by a
/// blank line.
std::string flatten_prompt(const ChatRequest& request);

struct ChatResult {
  std::string text;
  std::optional<TokenUsage> reported_usage;
  TokenUsage measured_usage;
  int attempts = 1;
  /// Locally measured prompt tokens spent on attempts that failed and were retried.
  std::int64_t failed_prompt_tokens = 0;
};

/// Raised for backend failures; transient ones are retried by the policy.
class BackendError : public Error {
 public:
  BackendError(ErrorCode code, const std::string& message, bool transient, int status = 0)
      : Error(code, message), transient_(transient), status_(status) {}

  bool transient() const noexcept { return transient_; }
  int status() const noexcept { return status_; }

 private:
  bool transient_;
  int status_;
};

struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};
  /// Each wait is scaled by a uniform factor in [1 - jitter, 1 + jitter].
  double jitter = 0.25;

  std::chrono::milliseconds backoff_for(int retry, double unit_random) const;
};

struct CallOptions {
  std::chrono::milliseconds timeout{120000};
  RetryPolicy retry;
};

struct RawCompletion {
  std::string text;
  std::optional<TokenUsage> reported_usage;
};

// ---------------------------------------------------------------------------
// Backend base
// ---------------------------------------------------------------------------

/// A named chat-completion endpoint. complete() is safe to call from many
/// threads; at most max_in_flight calls run inside complete_once() at a time.
class ChatBackend {
 public:
  explicit ChatBackend(std::string name, std::size_t max_in_flight = 8);
  virtual ~ChatBackend() = default;

  ChatBackend(const ChatBackend&) = delete;
  ChatBackend& operator=(const ChatBackend&) = delete;

  /// Validates the request, throttles, retries transient failures per the
  /// policy, rejects empty completions, and measures usage locally.
  ChatResult complete(const ChatRequest& request, const std::string& agent_id,
                      const Tokenizer& tokenizer, const CallOptions& options = {});

  /// One unthrottled attempt with no retries.
  virtual RawCompletion complete_once(const ChatRequest& request, const std::string& agent_id,
                                      std::chrono::milliseconds timeout) = 0;

  virtual std::string kind() const = 0;

  const std::string& name() const { return name_; }
  std::size_t max_in_flight() const { return max_in_flight_; }
  std::size_t peak_in_flight() const { return peak_in_flight_.load(); }

 private:
  std::string name_;
  std::size_t max_in_flight_;
  std::counting_semaphore<> slots_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> peak_in_flight_{0};
};

using BackendRegistry = std::map<std::string, std::shared_ptr<ChatBackend>>;

// ---------------------------------------------------------------------------
// Deterministic mock
// ---------------------------------------------------------------------------

/// Completion lengths are drawn from a normal distribution in tokens
/// (approx_chars rule: four bytes per token), clamped to
/// [min_tokens, max_output_tokens].
struct LengthModel {
  double mean_tokens = 300.0;
  double stddev_tokens = 50.0;
  int min_tokens = 8;
};

enum class JudgePolicy {
  kHash,    // verdict derived from the prompt digest
  kLonger,  // prefers the longer answer, tie on equal length
  kFirst,   // always prefers answer A (maximally position-biased)
};

const char* to_string(JudgePolicy policy);
JudgePolicy judge_policy_from_string(const std::string& s);

struct MockOptions {
  std::uint64_t seed = 0;
  LengthModel length;
  /// When > 0, an early-stop residual prompt with at least this many rounds
  /// is answered with the stop sentinel.
  int stop_at_layer = 0;
  JudgePolicy judge = JudgePolicy::kHash;
  /// Each call sleeps a prompt-derived duration in [0, max_latency].
  std::chrono::milliseconds max_latency{0};
};

/// Marker a query can carry to script an early stop for that query alone:
/// "<<stop@3>>" stops at layer 3 under a mock residual agent.
inline constexpr const char* kMockStopDirective = "<<stop@";

/// Pure function of (seed, agent, prompt, options). Understands the prompt
/// shapes the engine emits: single-pass critique prompts get a JSON object
/// with one key per requested peer, early-stop residual prompts may get the
/// stop sentinel (see MockOptions), judge prompts get a verdict line.
std::string mock_complete(std::uint64_t seed, const std::string& agent_id,
                          const std::string& rendered_prompt, const MockOptions& options = {},
                          int max_output_tokens = 1 << 20);

class MockBackend final : public ChatBackend {
 public:
  MockBackend(std::string name, MockOptions options, std::size_t max_in_flight = 8)
      : ChatBackend(std::move(name), max_in_flight), options_(options) {}

  RawCompletion complete_once(const ChatRequest& request, const std::string& agent_id,
                              std::chrono::milliseconds timeout) override;
  std::string kind() const override { return "mock"; }
  const MockOptions& options() const { return options_; }

 private:
  MockOptions options_;
};

/// Calls a user-supplied function; used to script exact behaviours in tests
/// and fixtures (failures, sentinels, malformed output).
class ScriptedBackend final : public ChatBackend {
 public:
  using Script = std::function<RawCompletion(const ChatRequest&, const std::string& agent_id)>;

  ScriptedBackend(std::string name, Script script, std::size_t max_in_flight = 8)
      : ChatBackend(std::move(name), max_in_flight), script_(std::move(script)) {}

  RawCompletion complete_once(const ChatRequest& request, const std::string& agent_id,
                              std::chrono::milliseconds timeout) override;
  std::string kind() const override { return "scripted"; }

 private:
  Script script_;
};

// ---------------------------------------------------------------------------
// Record / replay
// ---------------------------------------------------------------------------

/// Stable digest of (agent binding, system, messages): hex SHA-256 of their
/// canonical JSON encoding.
std::string request_key(const std::string& agent_id, const ChatRequest& request);

struct FixtureEntry {
  std::string key_digest;
  std::string agent_id;
  ChatRequest request;
  RawCompletion result;
};

/// One run's recorded calls. Saved as a JSON array of
/// {key_digest, request, result} sorted by key_digest.
class FixtureStore {
 public:
  static std::shared_ptr<FixtureStore> load(const std::string& path);

  /// Returns false when the key was already present (identical request).
  bool add(FixtureEntry entry);
  std::optional<FixtureEntry> find(const std::string& key_digest) const;
  std::size_t size() const;
  void save(const std::string& path) const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, FixtureEntry> entries_;
};

class ReplayBackend final : public ChatBackend {
 public:
  ReplayBackend(std::string name, std::shared_ptr<const FixtureStore> fixtures,
                std::size_t max_in_flight = 8)
      : ChatBackend(std::move(name), max_in_flight), fixtures_(std::move(fixtures)) {}

  /// Throws Error(kMissingFixture) for requests that were never recorded.
  RawCompletion complete_once(const ChatRequest& request, const std::string& agent_id,
                              std::chrono::milliseconds timeout) override;
  std::string kind() const override { return "replay"; }

 private:
  std::shared_ptr<const FixtureStore> fixtures_;
};

/// Forwards to an inner backend and appends every successful call to a
/// fixture store.
class RecordingBackend final : public ChatBackend {
 public:
  RecordingBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<FixtureStore> fixtures);

  RawCompletion complete_once(const ChatRequest& request, const std::string& agent_id,
                              std::chrono::milliseconds timeout) override;
  std::string kind() const override { return inner_->kind(); }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::shared_ptr<FixtureStore> fixtures_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP
// ---------------------------------------------------------------------------

struct ParsedUrl {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string path;  // no trailing slash; empty for the root
};

/// Throws Error(kConfig) for anything that is not http(s)://host[:port][/path].
ParsedUrl parse_base_url(const std::string& url);

/// POST {base_url}/chat/completions with {model, messages, temperature,
/// max_tokens}; reads choices[0].message.content and optional usage.
class HttpBackend final : public ChatBackend {
 public:
  HttpBackend(std::string name, std::string base_url, std::string model,
              std::string auth_token, std::size_t max_in_flight = 8);

  RawCompletion complete_once(const ChatRequest& request, const std::string& agent_id,
                              std::chrono::milliseconds timeout) override;
  std::string kind() const override { return "http"; }

  static nlohmann::json request_body(const std::string& model, const ChatRequest& request);
  static RawCompletion parse_response_body(const std::string& body);

 private:
  ParsedUrl url_;
  std::string model_;
  std::string auth_token_;
};

// ---------------------------------------------------------------------------
// Construction from declarative specs
// ---------------------------------------------------------------------------

struct BackendSpec {
  enum class Kind { kHttp, kMock, kReplay };

  std::string name;
  Kind kind = Kind::kMock;
  std::size_t max_in_flight = 8;
  // http
  std::string base_url;
  std::string model;
  std::string auth_env;  // name of the environment variable holding the bearer token
  // mock
  MockOptions mock;
  bool mock_seed_explicit = false;
  // replay
  std::string fixture_path;
};

std::shared_ptr<ChatBackend> make_backend(const BackendSpec& spec);

}  // namespace amoa
