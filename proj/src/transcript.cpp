#include "amoa/transcript.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace amoa {

using nlohmann::json;

std::size_t ConfigSnapshot::collaborator_count() const {
  return static_cast<std::size_t>(std::count_if(roster.begin(), roster.end(), [](const AgentSpec& a) {
    return a.role == AgentRole::kCollaborative;
  }));
}

const char* to_string(RunStatus status) {
  switch (status) {
    case RunStatus::kCompleted: return "completed";
    case RunStatus::kStopped: return "stopped";
    case RunStatus::kFailed: return "failed";
  }
  return "completed";
}

RunStatus run_status_from_string(const std::string& s) {
  if (s == "completed") return RunStatus::kCompleted;
  if (s == "stopped") return RunStatus::kStopped;
  if (s == "failed") return RunStatus::kFailed;
  throw Error(ErrorCode::kParse, "unknown run status '" + s + "'");
}

void to_json(json& j, const ChatMessage& m) {
  j = json{{"role", to_string(m.role)}, {"content", m.content}};
}

void from_json(const json& j, ChatMessage& m) {
  m.role = chat_role_from_string(j.at("role").get<std::string>());
  m.content = j.at("content").get<std::string>();
}

void to_json(json& j, const AgentSpec& a) {
  j = json{{"id", a.id},
           {"role", to_string(a.role)},
           {"backend", a.backend},
           {"temperature", a.gen.temperature},
           {"max_output_tokens", a.gen.max_output_tokens}};
}

void from_json(const json& j, AgentSpec& a) {
  a.id = j.at("id").get<std::string>();
  a.role = agent_role_from_string(j.at("role").get<std::string>());
  a.backend = j.at("backend").get<std::string>();
  a.gen.temperature = j.at("temperature").get<double>();
  a.gen.max_output_tokens = j.at("max_output_tokens").get<int>();
}

void to_json(json& j, const UsageRecord& u) {
  j = json{{"call_id", u.call_id},
           {"phase", to_string(u.phase)},
           {"layer", u.layer},
           {"agent_id", u.agent_id},
           {"prompt_tokens", u.prompt_tokens},
           {"completion_tokens", u.completion_tokens},
           {"cached_prompt_tokens", u.cached_prompt_tokens}};
}

void from_json(const json& j, UsageRecord& u) {
  u.call_id = j.at("call_id").get<std::size_t>();
  u.phase = phase_from_string(j.at("phase").get<std::string>());
  u.layer = j.at("layer").get<int>();
  u.agent_id = j.at("agent_id").get<std::string>();
  u.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
  u.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
  u.cached_prompt_tokens = j.at("cached_prompt_tokens").get<std::int64_t>();
  check_usage(u);
}

void to_json(json& j, const QueryContext& c) {
  j = json{{"history", c.history()}, {"query", c.query()}};
}

void from_json(const json& j, QueryContext& c) {
  c = QueryContext(j.value("history", std::vector<ChatMessage>{}),
                   j.at("query").get<std::string>());
}

namespace {

json response_json(const AgentResponse& r) {
  return json{{"agent_id", r.agent_id},
              {"layer", r.layer},
              {"stage", to_string(r.stage)},
              {"text", r.text},
              {"call_id", r.call_id}};
}

AgentResponse response_from(const json& j) {
  AgentResponse r;
  r.agent_id = j.at("agent_id").get<std::string>();
  r.layer = j.at("layer").get<int>();
  r.stage = response_stage_from_string(j.at("stage").get<std::string>());
  r.text = j.at("text").get<std::string>();
  r.call_id = j.at("call_id").get<std::size_t>();
  return r;
}

json instruction_json(const AttentionInstruction& a) {
  return json{{"advisor_id", a.advisor_id},
              {"recipient_id", a.recipient_id},
              {"layer", a.layer},
              {"kind", to_string(a.kind)},
              {"text", a.text}};
}

AttentionInstruction instruction_from(const json& j) {
  AttentionInstruction a;
  a.advisor_id = j.at("advisor_id").get<std::string>();
  a.recipient_id = j.at("recipient_id").get<std::string>();
  a.layer = j.at("layer").get<int>();
  a.kind = attention_kind_from_string(j.at("kind").get<std::string>());
  a.text = j.at("text").get<std::string>();
  check_instruction(a);
  return a;
}

json call_json(const CallRecord& c) {
  json j{{"call_id", c.call_id},
         {"phase", to_string(c.phase)},
         {"layer", c.layer},
         {"agent_id", c.agent_id},
         {"backend", c.backend},
         {"target", c.target},
         {"system", c.system ? json(*c.system) : json(nullptr)},
         {"messages", c.messages},
         {"completion", c.completion},
         {"attempts", c.attempts}};
  if (c.reported_usage) {
    j["reported_usage"] = json{{"prompt_tokens", c.reported_usage->prompt_tokens},
                               {"completion_tokens", c.reported_usage->completion_tokens}};
  } else {
    j["reported_usage"] = nullptr;
  }
  return j;
}

CallRecord call_from(const json& j) {
  CallRecord c;
  c.call_id = j.at("call_id").get<std::size_t>();
  c.phase = phase_from_string(j.at("phase").get<std::string>());
  c.layer = j.at("layer").get<int>();
  c.agent_id = j.at("agent_id").get<std::string>();
  c.backend = j.at("backend").get<std::string>();
  c.target = j.value("target", "");
  if (j.contains("system") && !j.at("system").is_null()) {
    c.system = j.at("system").get<std::string>();
  }
  c.messages = j.at("messages").get<std::vector<ChatMessage>>();
  c.completion = j.at("completion").get<std::string>();
  c.attempts = j.value("attempts", 1);
  if (j.contains("reported_usage") && !j.at("reported_usage").is_null()) {
    const auto& u = j.at("reported_usage");
    c.reported_usage = TokenUsage{u.at("prompt_tokens").get<std::int64_t>(),
                                  u.at("completion_tokens").get<std::int64_t>()};
  }
  return c;
}

json layer_json(const LayerTrace& l) {
  json j;
  j["layer"] = l.layer;
  j["layer_input"] = l.layer_input ? json(*l.layer_input) : json(nullptr);
  j["initial"] = json::array();
  for (const auto& r : l.initial) j["initial"].push_back(response_json(r));
  j["instructions"] = json::array();
  for (const auto& a : l.instructions) j["instructions"].push_back(instruction_json(a));
  j["refined"] = json::array();
  for (const auto& r : l.refined) j["refined"].push_back(response_json(r));
  j["summary"] = l.summary ? json(*l.summary) : json(nullptr);
  if (l.residual) {
    j["residual"] = json{{"raw_completion", l.residual->raw_completion},
                         {"stopped", l.residual->stopped},
                         {"rounds", l.residual->rounds}};
  } else {
    j["residual"] = nullptr;
  }
  if (l.output) {
    j["output"] = json{{"layer", l.output->layer},
                       {"text", l.output->text},
                       {"kind", to_string(l.output->kind)}};
  } else {
    j["output"] = nullptr;
  }
  j["calls"] = json::array();
  for (const auto& c : l.calls) j["calls"].push_back(call_json(c));
  return j;
}

LayerTrace layer_from(const json& j) {
  LayerTrace l;
  l.layer = j.at("layer").get<int>();
  if (!j.at("layer_input").is_null()) l.layer_input = j.at("layer_input").get<std::string>();
  for (const auto& r : j.at("initial")) l.initial.push_back(response_from(r));
  for (const auto& a : j.at("instructions")) l.instructions.push_back(instruction_from(a));
  for (const auto& r : j.at("refined")) l.refined.push_back(response_from(r));
  if (!j.at("summary").is_null()) l.summary = j.at("summary").get<std::string>();
  if (!j.at("residual").is_null()) {
    const auto& r = j.at("residual");
    l.residual = ResidualTrace{r.at("raw_completion").get<std::string>(),
                               r.at("stopped").get<bool>(),
                               r.at("rounds").get<std::size_t>()};
  }
  if (!j.at("output").is_null()) {
    const auto& o = j.at("output");
    l.output = LayerOutput{o.at("layer").get<int>(), o.at("text").get<std::string>(),
                           output_kind_from_string(o.at("kind").get<std::string>())};
  }
  for (const auto& c : j.at("calls")) l.calls.push_back(call_from(c));
  return l;
}

}  // namespace

void to_json(json& j, const RunTranscript& t) {
  j = json::object();
  j["schema_version"] = t.schema_version;
  j["config"] = json{{"roster", t.config.roster},
                     {"max_depth", t.config.max_depth},
                     {"attention", to_string(t.config.attention)},
                     {"early_stop", t.config.early_stop},
                     {"prefix_cache", t.config.prefix_cache},
                     {"cache_hit_cost", t.config.cache_hit_cost},
                     {"tokenizer", t.config.tokenizer},
                     {"seed", t.config.seed}};
  j["context"] = t.context;
  j["layers"] = json::array();
  for (const auto& l : t.layers) j["layers"].push_back(layer_json(l));
  j["ledger"] = t.ledger;
  j["diagnostics"] = json{{"failed_attempts", t.diagnostics.failed_attempts},
                          {"failed_prompt_tokens", t.diagnostics.failed_prompt_tokens}};
  j["termination"] = json{{"status", to_string(t.termination.status)},
                          {"layers_run", t.termination.layers_run},
                          {"stop_layer", t.termination.stop_layer},
                          {"skipped_layers", t.termination.skipped_layers},
                          {"error", t.termination.error}};
  j["final_output"] = t.final_output;
}

void from_json(const json& j, RunTranscript& t) {
  t.schema_version = j.at("schema_version").get<int>();
  if (t.schema_version != kTranscriptSchemaVersion) {
    throw Error(ErrorCode::kParse,
                "unsupported transcript schema_version " + std::to_string(t.schema_version));
  }
  const auto& c = j.at("config");
  t.config.roster = c.at("roster").get<std::vector<AgentSpec>>();
  t.config.max_depth = c.at("max_depth").get<int>();
  t.config.attention = attention_mode_from_string(c.at("attention").get<std::string>());
  t.config.early_stop = c.at("early_stop").get<bool>();
  t.config.prefix_cache = c.at("prefix_cache").get<bool>();
  t.config.cache_hit_cost = c.at("cache_hit_cost").get<double>();
  t.config.tokenizer = c.at("tokenizer").get<std::string>();
  t.config.seed = c.at("seed").get<std::uint64_t>();
  t.context = j.at("context").get<QueryContext>();
  t.layers.clear();
  for (const auto& l : j.at("layers")) t.layers.push_back(layer_from(l));
  t.ledger = j.at("ledger").get<std::vector<UsageRecord>>();
  const auto& d = j.at("diagnostics");
  t.diagnostics.failed_attempts = d.at("failed_attempts").get<std::int64_t>();
  t.diagnostics.failed_prompt_tokens = d.at("failed_prompt_tokens").get<std::int64_t>();
  const auto& term = j.at("termination");
  t.termination.status = run_status_from_string(term.at("status").get<std::string>());
  t.termination.layers_run = term.at("layers_run").get<int>();
  t.termination.stop_layer = term.at("stop_layer").get<int>();
  t.termination.skipped_layers = term.at("skipped_layers").get<std::vector<int>>();
  t.termination.error = term.at("error").get<std::string>();
  t.final_output = j.at("final_output").get<std::string>();
}

std::string serialize_transcript(const RunTranscript& transcript) {
  return json(transcript).dump(2) + "\n";
}

RunTranscript parse_transcript(const std::string& text) {
  try {
    return json::parse(text).get<RunTranscript>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed transcript: ") + e.what());
  }
}

void write_transcript(const std::string& path, const RunTranscript& transcript) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << serialize_transcript(transcript);
  if (!out) throw Error(ErrorCode::kWriteFailure, "cannot write transcript '" + path + "'");
}

RunTranscript read_transcript(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParse, "cannot open transcript '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_transcript(buf.str());
}

}  // namespace amoa
