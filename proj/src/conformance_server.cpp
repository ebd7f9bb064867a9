#include "amoa/conformance_server.hpp"

#include <httplib.h>

#include "amoa/accounting.hpp"

namespace amoa {

using nlohmann::json;

ConformanceServer::ConformanceServer(Options options)
    : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

ConformanceServer::~ConformanceServer() { stop(); }

std::vector<std::string> ConformanceServer::check_request(const json& body) {
  std::vector<std::string> problems;
  if (!body.is_object()) return {"body is not a JSON object"};
  if (!body.contains("model") || !body.at("model").is_string()) problems.push_back("model must be a string");
  if (!body.contains("messages") || !body.at("messages").is_array() || body.at("messages").empty()) {
    problems.push_back("messages must be a non-empty array");
  } else {
    for (const auto& m : body.at("messages")) {
      if (!m.is_object() || !m.contains("role") || !m.contains("content") || !m.at("role").is_string() ||
          !m.at("content").is_string()) {
        problems.push_back("each message needs string role and content");
        break;
      }
      const auto role = m.at("role").get<std::string>();
      if (role != "system" && role != "user" && role != "assistant") {
        problems.push_back("unknown role '" + role + "'");
        break;
      }
    }
  }
  if (body.contains("temperature") && !body.at("temperature").is_number()) {
    problems.push_back("temperature must be a number");
  }
  if (body.contains("max_tokens") && !body.at("max_tokens").is_number_integer()) {
    problems.push_back("max_tokens must be an integer");
  }
  return problems;
}

void ConformanceServer::install_routes() {
  server_->Post(R"(.*/chat/completions)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto n = requests_.fetch_add(1);
    if (!options_.required_token.empty() &&
        req.get_header_value("Authorization") != "Bearer " + options_.required_token) {
      res.status = 401;
      res.set_content(R"({"error":{"message":"unauthorized"}})", "application/json");
      return;
    }
    if (static_cast<int>(n) < options_.fail_first) {
      res.status = options_.fail_status;
      res.set_content(R"({"error":{"message":"scripted failure"}})", "application/json");
      return;
    }
    const auto body = json::parse(req.body, nullptr, false);
    const auto problems = body.is_discarded() ? std::vector<std::string>{"body is not JSON"} : check_request(body);
    if (!problems.empty()) {
      res.status = 400;
      res.set_content(json{{"error", {{"message", problems.front()}}}}.dump(), "application/json");
      return;
    }
    {
      std::lock_guard lock(mutex_);
      bodies_.push_back(body);
    }

    ChatRequest request;
    for (const auto& m : body.at("messages")) {
      const auto role = m.at("role").get<std::string>();
      if (role == "system" && !request.system && request.messages.empty()) {
        request.system = m.at("content").get<std::string>();
      } else {
        request.messages.push_back(ChatMessage{chat_role_from_string(role), m.at("content").get<std::string>()});
      }
    }
    const int max_tokens = body.value("max_tokens", 1 << 20);
    const auto prompt = flatten_prompt(request);
    const auto text = options_.empty_completions
                          ? std::string()
                          : mock_complete(options_.mock.seed, body.at("model").get<std::string>(), prompt,
                                          options_.mock, max_tokens);

    json reply{{"id", "chatcmpl-" + std::to_string(n)},
               {"object", "chat.completion"},
               {"model", body.at("model")},
               {"choices", json::array({json{{"index", 0},
                                             {"message", {{"role", "assistant"}, {"content", text}}},
                                             {"finish_reason", "stop"}}})}};
    if (options_.report_usage) {
      const auto tokenizer = Tokenizer::approx_chars();
      const auto p = count_tokens(prompt, tokenizer);
      const auto c = count_tokens(text, tokenizer);
      reply["usage"] = {{"prompt_tokens", p}, {"completion_tokens", c}, {"total_tokens", p + c}};
    }
    res.set_content(reply.dump(), "application/json");
  });
}

int ConformanceServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) throw Error(ErrorCode::kTransport, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void ConformanceServer::listen(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!server_->listen(host, port)) {
    throw Error(ErrorCode::kTransport, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void ConformanceServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string ConformanceServer::base_url() const {
  return "http://" + host_ + ":" + std::to_string(port_) + "/v1";
}

std::vector<json> ConformanceServer::received_bodies() const {
  std::lock_guard lock(mutex_);
  return bodies_;
}

}  // namespace amoa
