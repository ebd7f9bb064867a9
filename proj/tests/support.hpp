#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "amoa/backend.hpp"
#include "amoa/model.hpp"
#include "amoa/pipeline.hpp"

namespace amoa::testing {

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("amoa_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& name = "") const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// Collaborators a1..aN plus summary and residual agents, all bound to
/// `backend` unless a role-specific binding is given.
inline std::vector<AgentSpec> make_agents(std::size_t n, const std::string& backend = "mock",
                                          const std::string& residual_backend = "") {
  std::vector<AgentSpec> agents;
  for (std::size_t i = 1; i <= n; ++i) {
    agents.push_back(AgentSpec{"a" + std::to_string(i), AgentRole::kCollaborative, backend,
                               default_gen_params(AgentRole::kCollaborative)});
  }
  agents.push_back(AgentSpec{"sum", AgentRole::kSummary, backend, default_gen_params(AgentRole::kSummary)});
  agents.push_back(AgentSpec{"res", AgentRole::kResidual, residual_backend.empty() ? backend : residual_backend,
                             default_gen_params(AgentRole::kResidual)});
  return agents;
}

inline std::shared_ptr<MockBackend> make_mock(std::uint64_t seed = 0, MockOptions options = {}) {
  options.seed = seed;
  return std::make_shared<MockBackend>("mock", options);
}

inline PipelineConfig make_config(std::size_t n, int depth, AttentionMode mode = AttentionMode::kPairwise,
                                  bool early_stop = false,
                                  const std::string& residual_backend = "") {
  PipelineConfig config;
  config.roster = validate_roster(make_agents(n, "mock", residual_backend));
  config.max_depth = depth;
  config.attention = mode;
  config.early_stop = early_stop;
  config.call.retry.initial_backoff = std::chrono::milliseconds(1);
  config.call.retry.max_backoff = std::chrono::milliseconds(2);
  return config;
}

inline RawCompletion text_reply(std::string text) { return RawCompletion{std::move(text), std::nullopt}; }

}  // namespace amoa::testing
