#include "vizprompt/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace vizprompt {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw std::invalid_argument("'" + value + "' is not a valid number");
  }
  return out;
}

bool parse_bool(const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument("'" + value + "' is not a boolean");
}

std::size_t colon_of(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
    throw ConfigError("listen_address must be host:port, got '" + address + "'");
  }
  return colon;
}

}  // namespace

std::string ServiceConfig::host() const {
  return listen_address.substr(0, colon_of(listen_address));
}

int ServiceConfig::port() const {
  const auto colon = colon_of(listen_address);
  try {
    const int p = parse_number<int>(listen_address.substr(colon + 1));
    if (p < 0 || p > 65535) throw std::invalid_argument("port out of range");
    return p;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("listen_address: " + std::string(e.what()));
  }
}

PipelineOptions ServiceConfig::pipeline_options() const {
  PipelineOptions o;
  o.json_only = json_only;
  o.token_budget = token_budget;
  o.repair_rounds = repair_rounds;
  return o;
}

ServiceConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  ServiceConfig c;
  const auto path = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  const std::map<std::string, std::function<void(const std::string&)>> setters = {
      {"listen_address", [&](const std::string& v) { c.listen_address = v; }},
      {"state_dir", [&](const std::string& v) { c.state_dir = path(v); }},
      {"default_seed", [&](const std::string& v) { c.default_seed = parse_number<std::uint64_t>(v); }},
      {"cors_allowed_origin", [&](const std::string& v) { c.cors_allowed_origin = v; }},
      {"provider.kind",
       [&](const std::string& v) {
         if (v == "mock") {
           c.provider_kind = ProviderKind::Mock;
         } else if (v == "openai") {
           c.provider_kind = ProviderKind::OpenAi;
         } else {
           throw std::invalid_argument("expected openai or mock");
         }
       }},
      {"provider.fixtures_dir", [&](const std::string& v) { c.fixtures_dir = path(v); }},
      {"provider.endpoint_url", [&](const std::string& v) { c.provider.endpoint_url = v; }},
      {"provider.model_id", [&](const std::string& v) { c.provider.model_id = v; }},
      {"provider.api_key_env", [&](const std::string& v) { c.provider.api_key_env = v; }},
      {"provider.temperature", [&](const std::string& v) { c.provider.temperature = parse_number<double>(v); }},
      {"provider.timeout_seconds", [&](const std::string& v) { c.provider.timeout_seconds = parse_number<double>(v); }},
      {"provider.max_retries", [&](const std::string& v) { c.provider.max_retries = parse_number<int>(v); }},
      {"pipeline.json_only", [&](const std::string& v) { c.json_only = parse_bool(v); }},
      {"pipeline.token_budget", [&](const std::string& v) { c.token_budget = parse_number<std::size_t>(v); }},
      {"pipeline.repair_rounds", [&](const std::string& v) { c.repair_rounds = parse_number<int>(v); }},
      {"eval.max_concurrency", [&](const std::string& v) { c.eval_max_concurrency = parse_number<std::size_t>(v); }},
  };

  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    try {
      it->second(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + key + ": " + e.what());
    }
  }
  return c;
}

ServiceConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), file.parent_path());
}

void validate(const ServiceConfig& config) {
  config.port();
  if (config.host().empty()) throw ConfigError("listen_address has an empty host");
  try {
    config.provider.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("provider: ") + e.what());
  }
  if (config.provider_kind == ProviderKind::Mock && config.fixtures_dir.empty()) {
    throw ConfigError("provider.kind = mock needs provider.fixtures_dir");
  }
  if (config.token_budget == 0) throw ConfigError("pipeline.token_budget must be positive");
  if (config.repair_rounds < 0) throw ConfigError("pipeline.repair_rounds must be >= 0");

  std::error_code ec;
  std::filesystem::create_directories(config.state_dir, ec);
  const auto probe = config.state_dir / ".write-probe";
  {
    std::ofstream out(probe);
    if (!out || !(out << "ok")) {
      throw ConfigError("state_dir " + config.state_dir.string() + " is not writable");
    }
  }
  std::filesystem::remove(probe, ec);
}

std::shared_ptr<llm::Provider> make_provider(const ServiceConfig& config) {
  if (config.provider_kind == ProviderKind::Mock) {
    return llm::load_mock_fixtures(config.fixtures_dir);
  }
  return std::make_shared<llm::OpenAiProvider>();
}

}  // namespace vizprompt
