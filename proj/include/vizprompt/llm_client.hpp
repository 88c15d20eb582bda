#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace vizprompt::llm {

struct ProviderConfig {
  /// Base URL; requests go to `{endpoint_url}/chat/completions`.
  std::string endpoint_url = "https://api.openai.com/v1";
  std::string model_id = "gpt-4";
  /// Name of the environment variable holding the bearer token.
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  double timeout_seconds = 120.0;
  int max_retries = 2;

  /// Throws std::invalid_argument on a non-http(s) endpoint, a temperature
  /// outside [0, 2], a non-positive timeout or negative retries.
  void validate() const;
};

struct Completion {
  std::string raw_text;
  double latency_seconds = 0.0;
  int attempt_count = 0;
  std::string provider_id;
};

enum class ErrorKind {
  MissingApiKey,
  Timeout,
  Network,
  HttpError,
  MalformedProviderResponse,
  FixtureMiss,
};

std::string_view to_string(ErrorKind kind);
std::optional<ErrorKind> parse_error_kind(std::string_view text);

class ProviderError : public std::runtime_error {
 public:
  ProviderError(ErrorKind kind, const std::string& what, int status = 0)
      : std::runtime_error(what), kind_(kind), status_(status) {}

  ErrorKind kind() const { return kind_; }
  /// HTTP status for HttpError, 0 otherwise.
  int status() const { return status_; }
  /// Timeouts, connection failures, 429 and 5xx.
  bool retryable() const;

 private:
  ErrorKind kind_;
  int status_;
};

/// A chat-completion backend. `send` performs exactly one attempt and
/// either returns the assistant message content or throws ProviderError.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string id() const = 0;
  virtual std::string send(std::string_view prompt_text, const ProviderConfig& config) = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Delay before retry `n` (1-based): 1s, 2s, 4s, ...
std::chrono::milliseconds backoff_delay(int retry);

/// Sends `prompt_text`, retrying retryable failures up to
/// `config.max_retries` times with exponential backoff. Latency covers the
/// whole exchange including retries. `sleeper` defaults to
/// std::this_thread::sleep_for.
Completion complete(Provider& provider, std::string_view prompt_text,
                    const ProviderConfig& config, const Sleeper& sleeper = {});

/// JSON request body: `model`, `messages` (one user message), `temperature`.
std::string request_body(std::string_view prompt_text, const ProviderConfig& config);

/// `choices[0].message.content` of a chat-completion response body.
/// Throws ProviderError(MalformedProviderResponse).
std::string extract_content(std::string_view response_body);

/// OpenAI-compatible HTTP provider.
class OpenAiProvider : public Provider {
 public:
  std::string id() const override { return "openai-compatible"; }
  /// Reads the key from `config.api_key_env` on every call.
  std::string send(std::string_view prompt_text, const ProviderConfig& config) override;
};

/// Lowercase hex SHA-256 of the prompt bytes.
std::string prompt_digest(std::string_view prompt_text);

/// Scripted reply or scripted failure.
using ScriptedStep = std::variant<std::string, ProviderError>;

/// Offline provider keyed by prompt digest. Each digest maps to a list of
/// steps consumed in order; the last step repeats once the list is
/// exhausted, so a single-step entry is a pure lookup. Unknown digests
/// throw ProviderError(FixtureMiss). Safe for concurrent use.
class MockProvider : public Provider {
 public:
  MockProvider() = default;
  explicit MockProvider(std::map<std::string, std::vector<ScriptedStep>> fixtures);

  std::string id() const override { return "mock"; }
  std::string send(std::string_view prompt_text, const ProviderConfig& config) override;

  void add(const std::string& digest, std::vector<ScriptedStep> steps);
  void add_reply_for_prompt(std::string_view prompt_text, std::string reply);

  std::size_t calls() const;
  std::vector<std::string> prompts_seen() const;

 private:
  struct Entry {
    std::vector<ScriptedStep> steps;
    std::size_t cursor = 0;
  };

  mutable std::mutex mu_;
  std::map<std::string, Entry> fixtures_;
  std::vector<std::string> seen_;
};

/// Loads every `*.json` file in `dir`. Each file holds
/// `{"entries": [{"prompt_digest": "...", "steps": [{"reply": "..."} |
/// {"error": {"kind": "HttpError", "status": 503, "message": "..."}}]}]}`.
std::shared_ptr<MockProvider> load_mock_fixtures(const std::filesystem::path& dir);

}  // namespace vizprompt::llm
