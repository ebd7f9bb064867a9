#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "amoa/backend.hpp"

namespace httplib {
class Server;
}

namespace amoa {

/// A local OpenAI-compatible chat endpoint answering with mock completions.
/// Any POST path ending in /chat/completions is served; the request's model
/// name plays the part of the agent id, so distinct models get distinct
/// answers.
class ConformanceServer {
 public:
  struct Options {
    MockOptions mock;
    bool report_usage = true;
    /// The first `fail_first` requests are answered with `fail_status`.
    int fail_first = 0;
    int fail_status = 503;
    bool empty_completions = false;
    /// When non-empty, requests must carry "Authorization: Bearer <token>".
    std::string required_token;
  };

  explicit ConformanceServer(Options options);
  ~ConformanceServer();
  ConformanceServer(const ConformanceServer&) = delete;
  ConformanceServer& operator=(const ConformanceServer&) = delete;

  /// Binds and starts serving on a background thread; returns the port.
  /// Port 0 picks a free one.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

  int port() const { return port_; }
  std::string base_url() const;
  std::size_t request_count() const { return requests_.load(); }
  std::vector<nlohmann::json> received_bodies() const;

  /// Problems with the request body, empty when it conforms.
  static std::vector<std::string> check_request(const nlohmann::json& body);

 private:
  void install_routes();

  Options options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = 0;
  std::atomic<std::size_t> requests_{0};
  mutable std::mutex mutex_;
  std::vector<nlohmann::json> bodies_;
};

}  // namespace amoa
