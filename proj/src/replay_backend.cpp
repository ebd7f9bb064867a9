#include <filesystem>
#include <fstream>
#include <sstream>

#include "amoa/backend.hpp"
#include "amoa/digest.hpp"
#include "amoa/transcript.hpp"

namespace amoa {

using nlohmann::json;

namespace {

json request_json(const std::string& agent_id, const ChatRequest& request) {
  return json{{"agent", agent_id},
              {"system", request.system ? json(*request.system) : json(nullptr)},
              {"messages", request.messages},
              {"temperature", request.gen.temperature},
              {"max_tokens", request.gen.max_output_tokens}};
}

json result_json(const RawCompletion& r) {
  json j{{"text", r.text}};
  if (r.reported_usage) {
    j["reported_usage"] = json{{"prompt_tokens", r.reported_usage->prompt_tokens},
                               {"completion_tokens", r.reported_usage->completion_tokens}};
  } else {
    j["reported_usage"] = nullptr;
  }
  return j;
}

}  // namespace

std::string request_key(const std::string& agent_id, const ChatRequest& request) {
  const json key{{"agent", agent_id},
                 {"system", request.system ? json(*request.system) : json(nullptr)},
                 {"messages", request.messages}};
  return sha256_hex(key.dump());
}

std::shared_ptr<FixtureStore> FixtureStore::load(const std::string& path) {
  auto store = std::make_shared<FixtureStore>();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open replay fixture '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    const auto doc = json::parse(buf.str());
    for (const auto& item : doc) {
      FixtureEntry entry;
      entry.key_digest = item.at("key_digest").get<std::string>();
      const auto& req = item.at("request");
      entry.agent_id = req.at("agent").get<std::string>();
      if (!req.at("system").is_null()) entry.request.system = req.at("system").get<std::string>();
      entry.request.messages = req.at("messages").get<std::vector<ChatMessage>>();
      entry.request.gen.temperature = req.value("temperature", 0.0);
      entry.request.gen.max_output_tokens = req.value("max_tokens", 2048);
      const auto& res = item.at("result");
      entry.result.text = res.at("text").get<std::string>();
      if (res.contains("reported_usage") && !res.at("reported_usage").is_null()) {
        const auto& u = res.at("reported_usage");
        entry.result.reported_usage = TokenUsage{u.at("prompt_tokens").get<std::int64_t>(),
                                                 u.at("completion_tokens").get<std::int64_t>()};
      }
      store->entries_[entry.key_digest] = std::move(entry);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, "malformed replay fixture '" + path + "': " + e.what());
  }
  return store;
}

bool FixtureStore::add(FixtureEntry entry) {
  std::lock_guard lock(mutex_);
  auto key = entry.key_digest;
  return entries_.emplace(std::move(key), std::move(entry)).second;
}

std::optional<FixtureEntry> FixtureStore::find(const std::string& key_digest) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(key_digest);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::size_t FixtureStore::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void FixtureStore::save(const std::string& path) const {
  json doc = json::array();
  {
    std::lock_guard lock(mutex_);
    for (const auto& [key, entry] : entries_) {
      doc.push_back(json{{"key_digest", key},
                         {"request", request_json(entry.agent_id, entry.request)},
                         {"result", result_json(entry.result)}});
    }
  }
  std::error_code ec;
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (out) out << doc.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::kWriteFailure, "cannot write replay fixture '" + path + "'");
}

RawCompletion ReplayBackend::complete_once(const ChatRequest& request, const std::string& agent_id,
                                           std::chrono::milliseconds /*timeout*/) {
  const auto key = request_key(agent_id, request);
  auto entry = fixtures_->find(key);
  if (!entry) {
    throw Error(ErrorCode::kMissingFixture,
                "no recorded response for agent '" + agent_id + "' (key " + key + ")");
  }
  return entry->result;
}

RecordingBackend::RecordingBackend(std::shared_ptr<ChatBackend> inner,
                                   std::shared_ptr<FixtureStore> fixtures)
    : ChatBackend(inner->name(), inner->max_in_flight()),
      inner_(std::move(inner)),
      fixtures_(std::move(fixtures)) {}

RawCompletion RecordingBackend::complete_once(const ChatRequest& request, const std::string& agent_id,
                                              std::chrono::milliseconds timeout) {
  auto result = inner_->complete_once(request, agent_id, timeout);
  if (!result.text.empty()) {
    fixtures_->add(FixtureEntry{request_key(agent_id, request), agent_id, request, result});
  }
  return result;
}

}  // namespace amoa
