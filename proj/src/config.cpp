#include "amoa/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace amoa {

using nlohmann::json;

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
  throw Error(ErrorCode::kConfig, "config line " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

class ValueReader {
 public:
  ValueReader(std::string_view text, int line) : text_(text), line_(line) {}

  json read_value() {
    skip_space();
    if (pos_ >= text_.size()) fail(line_, "missing value");
    const char c = text_[pos_];
    if (c == '"') return read_string();
    if (c == '[') return read_array();
    return read_scalar();
  }

  void expect_end() {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] != '#') fail(line_, "unexpected text after value");
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  json read_string() {
    std::string out;
    ++pos_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (pos_ >= text_.size()) break;
      switch (text_[pos_++]) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: fail(line_, "unsupported escape in string");
      }
    }
    fail(line_, "unterminated string");
  }

  json read_array() {
    json out = json::array();
    ++pos_;
    while (true) {
      skip_space();
      if (pos_ >= text_.size()) fail(line_, "unterminated array");
      if (text_[pos_] == ']') {
        ++pos_;
        return out;
      }
      out.push_back(read_value());
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
      else if (pos_ < text_.size() && text_[pos_] != ']') fail(line_, "expected ',' or ']'");
    }
  }

  json read_scalar() {
    const auto start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' && text_[pos_] != '#' &&
           text_[pos_] != ' ' && text_[pos_] != '\t') {
      ++pos_;
    }
    const std::string token(text_.substr(start, pos_ - start));
    if (token == "true") return true;
    if (token == "false") return false;
    std::string digits;
    for (char c : token) {
      if (c != '_') digits.push_back(c);
    }
    if (digits.empty()) fail(line_, "missing value");
    try {
      std::size_t used = 0;
      if (digits.find_first_of(".eE") == std::string::npos) {
        const long long v = std::stoll(digits, &used);
        if (used == digits.size()) return v;
      } else {
        const double v = std::stod(digits, &used);
        if (used == digits.size() && std::isfinite(v)) return v;
      }
    } catch (const std::exception&) {
    }
    fail(line_, "cannot read value '" + token + "'");
  }

  std::string_view text_;
  int line_;
  std::size_t pos_ = 0;
};

std::vector<std::string> split_path(std::string_view header, int line) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : header) {
    if (c == '.') {
      if (current.empty()) fail(line, "empty table name segment");
      parts.push_back(current);
      current.clear();
    } else if (bare_key_char(c)) {
      current.push_back(c);
    } else if (c != ' ' && c != '\t') {
      fail(line, std::string("invalid character '") + c + "' in table name");
    }
  }
  if (current.empty()) fail(line, "empty table name segment");
  parts.push_back(current);
  return parts;
}

json* descend(json& root, const std::vector<std::string>& path, std::size_t count, int line) {
  json* node = &root;
  for (std::size_t i = 0; i < count; ++i) {
    auto& child = (*node)[path[i]];
    if (child.is_null()) child = json::object();
    if (child.is_array()) {
      if (child.empty() || !child.back().is_object()) fail(line, "'" + path[i] + "' is not a table");
      node = &child.back();
    } else if (child.is_object()) {
      node = &child;
    } else {
      fail(line, "'" + path[i] + "' is not a table");
    }
  }
  return node;
}

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kConfig, std::string("config key '") + key + "' has the wrong type");
  }
}

BackendSpec backend_from_json(const std::string& name, const json& t, std::size_t default_in_flight) {
  BackendSpec spec;
  spec.name = name;
  const auto kind = get_or<std::string>(t, "kind", "mock");
  if (kind == "mock") spec.kind = BackendSpec::Kind::kMock;
  else if (kind == "http") spec.kind = BackendSpec::Kind::kHttp;
  else if (kind == "replay") spec.kind = BackendSpec::Kind::kReplay;
  else throw Error(ErrorCode::kConfig, "backend '" + name + "' has unknown kind '" + kind + "'");

  const auto in_flight = get_or<long long>(t, "max_in_flight", static_cast<long long>(default_in_flight));
  if (in_flight < 1) throw Error(ErrorCode::kConfig, "backend '" + name + "': max_in_flight must be >= 1");
  spec.max_in_flight = static_cast<std::size_t>(in_flight);

  spec.base_url = get_or<std::string>(t, "base_url", "");
  spec.model = get_or<std::string>(t, "model", "");
  spec.auth_env = get_or<std::string>(t, "auth_env", "");
  spec.fixture_path = get_or<std::string>(t, "fixture", "");
  if (t.contains("seed")) {
    spec.mock.seed = get_or<std::uint64_t>(t, "seed", 0);
    spec.mock_seed_explicit = true;
  }
  spec.mock.length.mean_tokens = get_or<double>(t, "mean_tokens", spec.mock.length.mean_tokens);
  spec.mock.length.stddev_tokens = get_or<double>(t, "stddev_tokens", spec.mock.length.stddev_tokens);
  spec.mock.stop_at_layer = get_or<int>(t, "stop_at_layer", 0);
  spec.mock.judge = judge_policy_from_string(get_or<std::string>(t, "judge", "hash"));
  spec.mock.max_latency = std::chrono::milliseconds(get_or<long long>(t, "max_latency_ms", 0));

  if (spec.kind == BackendSpec::Kind::kHttp && spec.base_url.empty()) {
    throw Error(ErrorCode::kConfig, "http backend '" + name + "' needs base_url");
  }
  if (spec.kind == BackendSpec::Kind::kReplay && spec.fixture_path.empty()) {
    throw Error(ErrorCode::kConfig, "replay backend '" + name + "' needs fixture");
  }
  return spec;
}

AgentSpec agent_from_json(const json& t) {
  AgentSpec agent;
  agent.id = get_or<std::string>(t, "id", "");
  agent.role = agent_role_from_string(get_or<std::string>(t, "role", "collaborative"));
  agent.backend = get_or<std::string>(t, "backend", "");
  agent.gen = default_gen_params(agent.role);
  agent.gen.temperature = get_or<double>(t, "temperature", agent.gen.temperature);
  agent.gen.max_output_tokens = get_or<int>(t, "max_tokens", agent.gen.max_output_tokens);
  return agent;
}

}  // namespace

json parse_config_text(std::string_view text) {
  json root = json::object();
  json* table = &root;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto s = trim(raw);
    if (s.empty() || s.front() == '#') continue;

    if (s.starts_with("[[")) {
      const auto close = s.find("]]");
      if (close == std::string_view::npos) fail(line, "unterminated array-table header");
      const auto path = split_path(s.substr(2, close - 2), line);
      json* parent = descend(root, path, path.size() - 1, line);
      auto& arr = (*parent)[path.back()];
      if (arr.is_null()) arr = json::array();
      if (!arr.is_array()) fail(line, "'" + path.back() + "' is not an array of tables");
      arr.push_back(json::object());
      table = &arr.back();
      continue;
    }
    if (s.front() == '[') {
      const auto close = s.find(']');
      if (close == std::string_view::npos) fail(line, "unterminated table header");
      const auto path = split_path(s.substr(1, close - 1), line);
      table = descend(root, path, path.size(), line);
      continue;
    }

    const auto eq = s.find('=');
    if (eq == std::string_view::npos) fail(line, "expected key = value");
    auto key = trim(s.substr(0, eq));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    if (key.empty()) fail(line, "empty key");
    for (char c : key) {
      if (!bare_key_char(c)) fail(line, "invalid key '" + std::string(key) + "'");
    }
    ValueReader reader(s.substr(eq + 1), line);
    auto value = reader.read_value();
    reader.expect_end();
    if (table->contains(key)) fail(line, "duplicate key '" + std::string(key) + "'");
    (*table)[std::string(key)] = std::move(value);
  }
  return root;
}

RunSettings settings_from_json(const json& doc) {
  RunSettings s;
  s.seed = get_or<std::uint64_t>(doc, "seed", s.seed);
  s.layers = get_or<int>(doc, "layers", s.layers);
  s.attention = attention_mode_from_string(get_or<std::string>(doc, "attention", "pairwise"));
  s.early_stop = get_or<bool>(doc, "early_stop", s.early_stop);
  s.prefix_cache = get_or<bool>(doc, "prefix_cache", s.prefix_cache);
  s.cache_hit_cost = get_or<double>(doc, "cache_hit_cost", s.cache_hit_cost);
  s.tokenizer = get_or<std::string>(doc, "tokenizer", s.tokenizer);
  s.timeout_s = get_or<double>(doc, "timeout_s", s.timeout_s);
  s.retries = get_or<int>(doc, "retries", s.retries);
  if (doc.contains("run_deadline_s")) s.run_deadline_s = get_or<double>(doc, "run_deadline_s", 0.0);
  s.parallel = get_or<int>(doc, "parallel", s.parallel);
  const auto in_flight = get_or<long long>(doc, "max_in_flight", 8);

  if (doc.contains("backends")) {
    const auto& backends = doc.at("backends");
    if (!backends.is_object()) throw Error(ErrorCode::kConfig, "'backends' must be a table of tables");
    for (const auto& [name, table] : backends.items()) {
      if (!table.is_object()) throw Error(ErrorCode::kConfig, "backend '" + name + "' must be a table");
      s.backends.push_back(backend_from_json(name, table, static_cast<std::size_t>(std::max(1LL, in_flight))));
    }
  }
  if (doc.contains("agents")) {
    const auto& agents = doc.at("agents");
    if (!agents.is_array()) throw Error(ErrorCode::kConfig, "'agents' must be an array of tables");
    for (const auto& t : agents) s.agents.push_back(agent_from_json(t));
  }
  if (s.timeout_s <= 0) throw Error(ErrorCode::kConfig, "timeout_s must be positive");
  if (s.retries < 0) throw Error(ErrorCode::kConfig, "retries must be >= 0");
  if (s.parallel < 1) throw Error(ErrorCode::kConfig, "parallel must be >= 1");
  return s;
}

RunSettings load_settings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return settings_from_json(parse_config_text(buf.str()));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

RunSettings mock_settings(std::size_t collaborators, std::uint64_t seed) {
  RunSettings s;
  s.seed = seed;
  BackendSpec mock;
  mock.name = "mock";
  mock.kind = BackendSpec::Kind::kMock;
  s.backends.push_back(mock);
  const auto add = [&](std::string id, AgentRole role) {
    s.agents.push_back(AgentSpec{std::move(id), role, "mock", default_gen_params(role)});
  };
  for (std::size_t i = 1; i <= collaborators; ++i) add("a" + std::to_string(i), AgentRole::kCollaborative);
  add("aggregator", AgentRole::kSummary);
  add("residual", AgentRole::kResidual);
  add("judge", AgentRole::kJudge);
  return s;
}

void resize_collaborators(RunSettings& settings, std::size_t collaborators) {
  std::string backend = settings.backends.empty() ? "mock" : settings.backends.front().name;
  std::vector<AgentSpec> others;
  for (const auto& a : settings.agents) {
    if (a.role == AgentRole::kCollaborative) backend = a.backend;
    else others.push_back(a);
  }
  std::vector<AgentSpec> agents;
  for (std::size_t i = 1; i <= collaborators; ++i) {
    agents.push_back(AgentSpec{"a" + std::to_string(i), AgentRole::kCollaborative, backend,
                               default_gen_params(AgentRole::kCollaborative)});
  }
  agents.insert(agents.end(), others.begin(), others.end());
  settings.agents = std::move(agents);
}

BackendRegistry build_backends(const RunSettings& settings) {
  BackendRegistry registry;
  for (auto spec : settings.backends) {
    if (spec.kind == BackendSpec::Kind::kMock && !spec.mock_seed_explicit) spec.mock.seed = settings.seed;
    if (registry.contains(spec.name)) {
      throw Error(ErrorCode::kConfig, "backend '" + spec.name + "' defined twice");
    }
    registry.emplace(spec.name, make_backend(spec));
  }
  return registry;
}

PipelineConfig pipeline_config(const RunSettings& settings) {
  PipelineConfig config;
  config.roster = validate_roster(settings.agents);
  config.max_depth = settings.layers;
  config.attention = settings.attention;
  config.early_stop = settings.early_stop;
  config.cache.enabled = settings.prefix_cache;
  config.cache.hit_cost_factor = settings.cache_hit_cost;
  config.seed = settings.seed;
  config.tokenizer = Tokenizer::from_name(settings.tokenizer);
  config.call.timeout = std::chrono::milliseconds(static_cast<long long>(settings.timeout_s * 1000.0));
  config.call.retry.max_retries = settings.retries;
  if (settings.run_deadline_s) {
    config.run_deadline =
        std::chrono::milliseconds(static_cast<long long>(*settings.run_deadline_s * 1000.0));
  }
  validate_config(config);
  return config;
}

}  // namespace amoa
