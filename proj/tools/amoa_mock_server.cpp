#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "amoa/conformance_server.hpp"

namespace {
amoa::ConformanceServer* g_server = nullptr;
void handle_signal(int) {
  if (g_server) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local OpenAI-compatible chat endpoint serving deterministic mock completions"};
  std::string host = "127.0.0.1";
  int port = 8089;
  amoa::ConformanceServer::Options options;
  std::string judge = "hash";
  app.add_option("--host", host, "Bind address")->capture_default_str();
  app.add_option("--port", port, "Port")->capture_default_str()->check(CLI::Range(1, 65535));
  app.add_option("--seed", options.mock.seed, "Mock seed");
  app.add_option("--stop-at-layer", options.mock.stop_at_layer, "Answer early-stop prompts with the stop signal from this layer on");
  app.add_option("--judge-policy", judge, "Verdict rule for judge prompts")->check(CLI::IsMember({"hash", "longer", "first"}));
  app.add_option("--fail-first", options.fail_first, "Answer the first K requests with an error status");
  app.add_option("--fail-status", options.fail_status, "Status used by --fail-first")->capture_default_str();
  app.add_option("--token", options.required_token, "Require this bearer token");
  bool no_usage = false;
  app.add_flag("--no-usage", no_usage, "Omit the usage object from responses");
  CLI11_PARSE(app, argc, argv);
  options.report_usage = !no_usage;
  options.mock.judge = amoa::judge_policy_from_string(judge);

  amoa::ConformanceServer server(options);
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  std::cerr << "serving on http://" << host << ":" << port << "/v1/chat/completions\n";
  try {
    server.listen(host, port);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
