#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vizprompt/dataset.hpp"
#include "vizprompt/llm_client.hpp"
#include "vizprompt/prompt.hpp"
#include "vizprompt/registry.hpp"
#include "vizprompt/response.hpp"
#include "vizprompt/validate.hpp"

namespace vizprompt {

struct PipelineOptions {
  bool json_only = true;
  std::size_t token_budget = 8000;
  /// Repair rounds after an Invalid verdict; 0 disables repair.
  int repair_rounds = 1;
  /// When set, each accepted reply is also checked for ambiguity coverage.
  std::optional<AmbiguityCandidates> ambiguity_candidates;
  llm::Sleeper sleeper = {};
};

/// Codes: TokenBudgetExceeded, ProviderError, InvalidSpecification,
/// RepairFailed.
struct PipelineError {
  std::string code;
  std::string message;
  /// llm::ErrorKind name for ProviderError.
  std::optional<std::string> provider_kind;

  bool operator==(const PipelineError&) const = default;
};

struct Turn {
  std::string query;
  QueryMode mode = QueryMode::Initial;
  /// Present iff the pipeline produced a non-Invalid specification.
  std::optional<AnalyticSpecification> specification;
  ValidationReport report;
  double latency_seconds = 0.0;
  /// Provider round trips, including retries and repair rounds.
  int attempts = 0;
  /// Replies in order (original, then repair rounds).
  std::vector<std::string> raw_responses;
  std::string prompt_digest;
  std::optional<PipelineError> error;

  bool succeeded() const { return specification.has_value(); }
  bool operator==(const Turn&) const = default;
};

nlohmann::ordered_json to_json(const Turn& turn);
Turn turn_from_json(const nlohmann::ordered_json& j);

class NoPriorSpecification : public std::logic_error {
 public:
  NoPriorSpecification()
      : std::logic_error("follow-up query needs an earlier turn with a specification") {}
};

/// Conversation over one dataset. The data subset is drawn once at
/// construction so every turn embeds the same sample rows. `ask` calls are
/// serialized; history reads do not wait for an in-flight `ask`.
class Session {
 public:
  Session(std::string id, std::shared_ptr<const Dataset> dataset, std::uint64_t subset_seed);

  const std::string& id() const { return id_; }
  const std::string& dataset_id() const { return dataset_->id(); }
  const Dataset& dataset() const { return *dataset_; }
  std::uint64_t subset_seed() const { return subset_seed_; }
  const DataSubset& subset() const { return subset_; }

  std::vector<Turn> turns() const;
  std::size_t turn_count() const;
  /// Most recent successful specification, if any.
  std::optional<AnalyticSpecification> latest_specification() const;

  /// Builds the prompt `ask` would send, without sending it.
  AssembledPrompt prompt_for(std::string_view query, QueryMode mode,
                             const PipelineOptions& options) const;

  /// assemble -> complete -> parse -> validate -> (repair), then appends the
  /// turn. Throws std::invalid_argument for a blank query and
  /// NoPriorSpecification for a FollowUp without a successful earlier turn;
  /// every other failure is recorded in the returned Turn.
  Turn ask(std::string_view query, QueryMode mode, llm::Provider& provider,
           const llm::ProviderConfig& config, const PipelineOptions& options = {});

  /// Appends an already completed turn, e.g. one restored from disk or a
  /// previous specification supplied by the caller.
  void append(Turn turn);

  nlohmann::ordered_json to_json() const;
  static std::shared_ptr<Session> from_json(const nlohmann::ordered_json& j,
                                            std::shared_ptr<const Dataset> dataset);

 private:
  std::optional<AnalyticSpecification> latest_locked() const;

  std::string id_;
  std::shared_ptr<const Dataset> dataset_;
  std::uint64_t subset_seed_;
  DataSubset subset_;

  std::mutex ask_mu_;
  mutable std::mutex state_mu_;
  std::vector<Turn> turns_;
};

/// Fresh session with a random id.
std::shared_ptr<Session> create_session(std::shared_ptr<const Dataset> dataset,
                                        std::uint64_t seed);

std::string new_session_id();

/// Sessions persisted as `<state_dir>/sessions/<id>.json`, rewritten
/// atomically (temp file + rename) after each turn.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path state_dir);

  std::shared_ptr<Session> create(std::shared_ptr<const Dataset> dataset, std::uint64_t seed);
  std::shared_ptr<Session> find(const std::string& id) const;
  void save(const Session& session) const;

  /// Reloads persisted sessions whose dataset is still registered.
  std::size_t load_all(const DatasetRegistry& registry);

  std::filesystem::path path_for(const std::string& id) const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace vizprompt
