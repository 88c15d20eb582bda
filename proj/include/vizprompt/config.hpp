#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "vizprompt/llm_client.hpp"
#include "vizprompt/session.hpp"

namespace vizprompt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ProviderKind { OpenAi, Mock };

struct ServiceConfig {
  std::string listen_address = "127.0.0.1:8080";
  /// Holds `datasets/` and `sessions/`.
  std::filesystem::path state_dir = "vizprompt-state";
  ProviderKind provider_kind = ProviderKind::OpenAi;
  std::filesystem::path fixtures_dir;
  llm::ProviderConfig provider;
  std::uint64_t default_seed = 0;
  std::optional<std::string> cors_allowed_origin;
  bool json_only = true;
  std::size_t token_budget = 8000;
  int repair_rounds = 1;
  /// Cap on concurrent sequence groups in `eval run` against a live
  /// provider. Mock runs are uncapped.
  std::size_t eval_max_concurrency = 4;

  std::string host() const;
  int port() const;
  std::filesystem::path datasets_dir() const { return state_dir / "datasets"; }
  PipelineOptions pipeline_options() const;
};

/// `key = value` lines; `#` starts a comment line. Unknown keys and
/// malformed values throw ConfigError naming the line.
///
///   listen_address        host:port
///   state_dir             path
///   default_seed          unsigned integer
///   cors_allowed_origin   origin
///   provider.kind         openai | mock
///   provider.fixtures_dir path (mock)
///   provider.endpoint_url, provider.model_id, provider.api_key_env,
///   provider.temperature, provider.timeout_seconds, provider.max_retries
///   pipeline.json_only    true | false
///   pipeline.token_budget, pipeline.repair_rounds
///   eval.max_concurrency
///
/// Relative paths resolve against `base_dir`.
ServiceConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ServiceConfig load_config(const std::filesystem::path& file);

/// Range checks plus a write probe in `state_dir` (created if missing).
void validate(const ServiceConfig& config);

std::shared_ptr<llm::Provider> make_provider(const ServiceConfig& config);

}  // namespace vizprompt
