#include "vizprompt/llm_client.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace vizprompt::llm {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // base path without trailing slash
};

Endpoint split_endpoint(std::string_view url) {
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string_view::npos ? 0 : scheme_end + 3);
  Endpoint e;
  e.origin = std::string(url.substr(0, path_start));
  e.path = path_start == std::string_view::npos ? "" : std::string(url.substr(path_start));
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  return e;
}

}  // namespace

void ProviderConfig::validate() const {
  if (!(endpoint_url.starts_with("http://") || endpoint_url.starts_with("https://")) ||
      endpoint_url.size() <= 8) {
    throw std::invalid_argument("endpoint_url must be an absolute http(s) URL");
  }
  if (model_id.empty()) throw std::invalid_argument("model_id must be set");
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw std::invalid_argument("temperature must be in [0, 2]");
  }
  if (!(timeout_seconds > 0.0)) throw std::invalid_argument("timeout_seconds must be positive");
  if (max_retries < 0) throw std::invalid_argument("max_retries must be non-negative");
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingApiKey: return "MissingApiKey";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::Network: return "Network";
    case ErrorKind::HttpError: return "HttpError";
    case ErrorKind::MalformedProviderResponse: return "MalformedProviderResponse";
    case ErrorKind::FixtureMiss: return "FixtureMiss";
  }
  return "";
}

std::optional<ErrorKind> parse_error_kind(std::string_view text) {
  for (auto k : {ErrorKind::MissingApiKey, ErrorKind::Timeout, ErrorKind::Network,
                 ErrorKind::HttpError, ErrorKind::MalformedProviderResponse,
                 ErrorKind::FixtureMiss}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

bool ProviderError::retryable() const {
  switch (kind_) {
    case ErrorKind::Timeout:
    case ErrorKind::Network:
      return true;
    case ErrorKind::HttpError:
      return status_ == 429 || status_ >= 500;
    default:
      return false;
  }
}

std::chrono::milliseconds backoff_delay(int retry) {
  return std::chrono::milliseconds(1000LL << std::max(0, retry - 1));
}

Completion complete(Provider& provider, std::string_view prompt_text,
                    const ProviderConfig& config, const Sleeper& sleeper) {
  const auto start = std::chrono::steady_clock::now();
  Completion out;
  out.provider_id = provider.id();
  for (int attempt = 1;; ++attempt) {
    out.attempt_count = attempt;
    try {
      out.raw_text = provider.send(prompt_text, config);
      break;
    } catch (const ProviderError& e) {
      if (!e.retryable() || attempt > config.max_retries) throw;
      const auto delay = backoff_delay(attempt);
      if (sleeper) {
        sleeper(delay);
      } else {
        std::this_thread::sleep_for(delay);
      }
    }
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  // steady_clock can tick coarser than a mock lookup; latency stays positive.
  out.latency_seconds = std::max(elapsed.count(), 1e-9);
  return out;
}

std::string request_body(std::string_view prompt_text, const ProviderConfig& config) {
  nlohmann::ordered_json body;
  body["model"] = config.model_id;
  body["messages"] = nlohmann::ordered_json::array(
      {{{"role", "user"}, {"content", std::string(prompt_text)}}});
  body["temperature"] = config.temperature;
  return body.dump();
}

std::string extract_content(std::string_view response_body) {
  const auto doc = nlohmann::json::parse(response_body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ProviderError(ErrorKind::MalformedProviderResponse, "provider response is not JSON");
  }
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    throw ProviderError(ErrorKind::MalformedProviderResponse, "provider response has no choices");
  }
  const auto& first = (*choices)[0];
  if (!first.contains("message") || !first["message"].is_object() ||
      !first["message"].contains("content") || !first["message"]["content"].is_string()) {
    throw ProviderError(ErrorKind::MalformedProviderResponse,
                        "provider response lacks message content");
  }
  return first["message"]["content"].get<std::string>();
}

std::string OpenAiProvider::send(std::string_view prompt_text, const ProviderConfig& config) {
  const char* key = std::getenv(config.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw ProviderError(ErrorKind::MissingApiKey,
                        "environment variable " + config.api_key_env + " is not set");
  }
  const Endpoint ep = split_endpoint(config.endpoint_url);
  httplib::Client client(ep.origin);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(config.timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};
  auto res = client.Post(ep.path + "/chat/completions", headers,
                         request_body(prompt_text, config), "application/json");
  if (!res) {
    const auto err = res.error();
    const std::string what = "request to " + config.endpoint_url + " failed: " + httplib::to_string(err);
    if (err == httplib::Error::Read || err == httplib::Error::Write ||
        err == httplib::Error::ConnectionTimeout) {
      throw ProviderError(ErrorKind::Timeout, what);
    }
    throw ProviderError(ErrorKind::Network, what);
  }
  if (res->status < 200 || res->status >= 300) {
    throw ProviderError(ErrorKind::HttpError,
                        "provider returned HTTP " + std::to_string(res->status), res->status);
  }
  return extract_content(res->body);
}

}  // namespace vizprompt::llm
