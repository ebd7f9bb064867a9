#include <regex>

#include <httplib.h>

#include "amoa/backend.hpp"
#include "amoa/transcript.hpp"

namespace amoa {

using nlohmann::json;

ParsedUrl parse_base_url(const std::string& url) {
  static const std::regex kUrl(R"(^(https?)://([A-Za-z0-9.\-]+|\[[0-9A-Fa-f:]+\])(?::(\d{1,5}))?(/[^\s?#]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) {
    throw Error(ErrorCode::kConfig, "invalid base_url '" + url + "'");
  }
  ParsedUrl parsed;
  parsed.scheme = m[1].str();
  parsed.host = m[2].str();
  parsed.port = m[3].matched ? std::stoi(m[3].str()) : (parsed.scheme == "https" ? 443 : 80);
  if (parsed.port <= 0 || parsed.port > 65535) {
    throw Error(ErrorCode::kConfig, "invalid port in base_url '" + url + "'");
  }
  parsed.path = m[4].matched ? m[4].str() : "";
  while (!parsed.path.empty() && parsed.path.back() == '/') parsed.path.pop_back();
  return parsed;
}

HttpBackend::HttpBackend(std::string name, std::string base_url, std::string model,
                         std::string auth_token, std::size_t max_in_flight)
    : ChatBackend(std::move(name), max_in_flight),
      url_(parse_base_url(base_url)),
      model_(std::move(model)),
      auth_token_(std::move(auth_token)) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (url_.scheme == "https") {
    throw Error(ErrorCode::kConfig, "this build has no TLS support for '" + base_url + "'");
  }
#endif
}

json HttpBackend::request_body(const std::string& model, const ChatRequest& request) {
  json messages = json::array();
  if (request.system) messages.push_back(json{{"role", "system"}, {"content", *request.system}});
  for (const auto& m : request.messages) {
    messages.push_back(json{{"role", to_string(m.role)}, {"content", m.content}});
  }
  return json{{"model", model},
              {"messages", messages},
              {"temperature", request.gen.temperature},
              {"max_tokens", request.gen.max_output_tokens}};
}

RawCompletion HttpBackend::parse_response_body(const std::string& body) {
  const auto doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw BackendError(ErrorCode::kRemoteStatus, "response body is not a JSON object", false);
  }
  RawCompletion out;
  try {
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    out.text = content.is_null() ? std::string() : content.get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(ErrorCode::kRemoteStatus,
                       std::string("response lacks choices[0].message.content: ") + e.what(), false);
  }
  if (doc.contains("usage") && doc.at("usage").is_object()) {
    const auto& u = doc.at("usage");
    if (u.contains("prompt_tokens") && u.contains("completion_tokens")) {
      out.reported_usage = TokenUsage{u.at("prompt_tokens").get<std::int64_t>(),
                                      u.at("completion_tokens").get<std::int64_t>()};
    }
  }
  return out;
}

RawCompletion HttpBackend::complete_once(const ChatRequest& request, const std::string& /*agent_id*/,
                                         std::chrono::milliseconds timeout) {
  const auto origin = url_.scheme + "://" + url_.host + ":" + std::to_string(url_.port);
  httplib::Client client(origin);
  const auto seconds = static_cast<time_t>(timeout.count() / 1000);
  const auto micros = static_cast<time_t>((timeout.count() % 1000) * 1000);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);

  httplib::Headers headers;
  if (!auth_token_.empty()) headers.emplace("Authorization", "Bearer " + auth_token_);

  const auto res = client.Post(url_.path + "/chat/completions", headers,
                               request_body(model_, request).dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const bool timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
    throw BackendError(timed_out ? ErrorCode::kTimeout : ErrorCode::kTransport,
                       "backend '" + name() + "': " + httplib::to_string(err), true);
  }
  if (res->status != 200) {
    const bool transient = res->status == 408 || res->status == 429 || res->status >= 500;
    throw BackendError(ErrorCode::kRemoteStatus,
                       "backend '" + name() + "' answered HTTP " + std::to_string(res->status) +
                           ": " + res->body.substr(0, 200),
                       transient, res->status);
  }
  return parse_response_body(res->body);
}

}  // namespace amoa
