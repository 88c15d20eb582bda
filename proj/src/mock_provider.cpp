#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "vizprompt/llm_client.hpp"

namespace vizprompt::llm {

std::string prompt_digest(std::string_view prompt_text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(prompt_text.data(), prompt_text.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

MockProvider::MockProvider(std::map<std::string, std::vector<ScriptedStep>> fixtures) {
  for (auto& [digest, steps] : fixtures) add(digest, std::move(steps));
}

void MockProvider::add(const std::string& digest, std::vector<ScriptedStep> steps) {
  if (steps.empty()) throw std::invalid_argument("mock fixture " + digest + " has no steps");
  std::lock_guard lock(mu_);
  fixtures_[digest] = Entry{std::move(steps), 0};
}

void MockProvider::add_reply_for_prompt(std::string_view prompt_text, std::string reply) {
  add(prompt_digest(prompt_text), {ScriptedStep{std::move(reply)}});
}

std::string MockProvider::send(std::string_view prompt_text, const ProviderConfig&) {
  const std::string digest = prompt_digest(prompt_text);
  std::lock_guard lock(mu_);
  seen_.push_back(digest);
  auto it = fixtures_.find(digest);
  if (it == fixtures_.end()) {
    throw ProviderError(ErrorKind::FixtureMiss, "no mock fixture for prompt digest " + digest);
  }
  Entry& entry = it->second;
  const ScriptedStep& step = entry.steps[std::min(entry.cursor, entry.steps.size() - 1)];
  ++entry.cursor;
  if (const auto* error = std::get_if<ProviderError>(&step)) throw *error;
  return std::get<std::string>(step);
}

std::size_t MockProvider::calls() const {
  std::lock_guard lock(mu_);
  return seen_.size();
}

std::vector<std::string> MockProvider::prompts_seen() const {
  std::lock_guard lock(mu_);
  return seen_;
}

std::shared_ptr<MockProvider> load_mock_fixtures(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("mock fixture directory " + dir.string() + " does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  auto provider = std::make_shared<MockProvider>();
  for (const auto& file : files) {
    std::ifstream in(file);
    std::stringstream buf;
    buf << in.rdbuf();
    const auto doc = nlohmann::json::parse(buf.str(), nullptr, false);
    if (doc.is_discarded() || !doc.contains("entries")) {
      throw std::runtime_error(file.string() + ": expected {\"entries\": [...]}");
    }
    for (const auto& e : doc["entries"]) {
      std::vector<ScriptedStep> steps;
      for (const auto& s : e.at("steps")) {
        if (s.contains("reply")) {
          steps.emplace_back(s["reply"].get<std::string>());
        } else if (s.contains("error")) {
          const auto& err = s["error"];
          const auto kind = parse_error_kind(err.value("kind", ""));
          if (!kind) throw std::runtime_error(file.string() + ": unknown error kind");
          steps.emplace_back(ProviderError(*kind, err.value("message", "scripted failure"),
                                           err.value("status", 0)));
        } else {
          throw std::runtime_error(file.string() + ": step needs reply or error");
        }
      }
      provider->add(e.at("prompt_digest").get<std::string>(), std::move(steps));
    }
  }
  return provider;
}

}  // namespace vizprompt::llm
