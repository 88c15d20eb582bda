#include "vizprompt/session.hpp"

#include <chrono>
#include <fstream>
#include <random>
#include <sstream>

#include "vizprompt/repair.hpp"

namespace vizprompt {

namespace {

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
  return std::max(d.count(), 1e-9);
}

}  // namespace

nlohmann::ordered_json to_json(const Turn& turn) {
  nlohmann::ordered_json j;
  j["query"] = turn.query;
  j["mode"] = std::string(to_string(turn.mode));
  if (turn.specification) {
    j["specification"] = to_json(*turn.specification);
    j["explanation"] = turn.specification->explanation
                           ? nlohmann::ordered_json(*turn.specification->explanation)
                           : nlohmann::ordered_json(nullptr);
  } else {
    j["specification"] = nullptr;
  }
  j["report"] = to_json(turn.report);
  j["latency_seconds"] = turn.latency_seconds;
  j["attempts"] = turn.attempts;
  j["raw_responses"] = turn.raw_responses;
  j["prompt_digest"] = turn.prompt_digest;
  if (turn.error) {
    nlohmann::ordered_json e;
    e["code"] = turn.error->code;
    e["message"] = turn.error->message;
    if (turn.error->provider_kind) e["provider_kind"] = *turn.error->provider_kind;
    j["error"] = e;
  } else {
    j["error"] = nullptr;
  }
  return j;
}

Turn turn_from_json(const nlohmann::ordered_json& j) {
  Turn t;
  t.query = j.at("query").get<std::string>();
  const auto mode = parse_query_mode(j.at("mode").get<std::string>());
  if (!mode) throw std::runtime_error("turn has unknown mode");
  t.mode = *mode;
  if (j.contains("specification") && !j["specification"].is_null()) {
    t.specification = specification_from_json(j["specification"]);
    if (j.contains("explanation") && j["explanation"].is_string()) {
      t.specification->explanation = j["explanation"].get<std::string>();
    }
  }
  t.report = report_from_json(j.at("report"));
  t.latency_seconds = j.value("latency_seconds", 0.0);
  t.attempts = j.value("attempts", 0);
  t.raw_responses = j.value("raw_responses", std::vector<std::string>{});
  t.prompt_digest = j.value("prompt_digest", "");
  if (j.contains("error") && j["error"].is_object()) {
    const auto& e = j["error"];
    PipelineError err{e.at("code").get<std::string>(), e.value("message", ""), std::nullopt};
    if (e.contains("provider_kind")) err.provider_kind = e["provider_kind"].get<std::string>();
    t.error = std::move(err);
  }
  return t;
}

Session::Session(std::string id, std::shared_ptr<const Dataset> dataset,
                 std::uint64_t subset_seed)
    : id_(std::move(id)),
      dataset_(std::move(dataset)),
      subset_seed_(subset_seed),
      subset_(vizprompt::subset(*dataset_, subset_seed)) {}

std::vector<Turn> Session::turns() const {
  std::lock_guard lock(state_mu_);
  return turns_;
}

std::size_t Session::turn_count() const {
  std::lock_guard lock(state_mu_);
  return turns_.size();
}

std::optional<AnalyticSpecification> Session::latest_locked() const {
  for (auto it = turns_.rbegin(); it != turns_.rend(); ++it) {
    if (it->specification) return it->specification;
  }
  return std::nullopt;
}

std::optional<AnalyticSpecification> Session::latest_specification() const {
  std::lock_guard lock(state_mu_);
  return latest_locked();
}

AssembledPrompt Session::prompt_for(std::string_view query, QueryMode mode,
                                    const PipelineOptions& options) const {
  if (blank(query)) throw std::invalid_argument("query is blank");
  std::optional<AnalyticSpecification> previous;
  if (mode == QueryMode::FollowUp) {
    previous = latest_specification();
    if (!previous) throw NoPriorSpecification();
  }
  PromptConfig config;
  config.mode = mode;
  config.json_only = options.json_only;
  config.token_budget = options.token_budget;
  config.seed = subset_seed_;
  const std::vector<std::string> queries{std::string(query)};
  return assemble(subset_, queries, config, previous ? &*previous : nullptr);
}

Turn Session::ask(std::string_view query, QueryMode mode, llm::Provider& provider,
                  const llm::ProviderConfig& config, const PipelineOptions& options) {
  std::lock_guard ask_lock(ask_mu_);

  Turn turn;
  turn.query = std::string(query);
  turn.mode = mode;

  const auto record = [&](Turn t) {
    std::lock_guard lock(state_mu_);
    turns_.push_back(t);
    return t;
  };

  std::string prompt_text;
  try {
    prompt_text = render(prompt_for(query, mode, options));
  } catch (const PromptError& e) {
    turn.error = PipelineError{std::string(to_string(e.kind())), e.what(), std::nullopt};
    return record(std::move(turn));
  }
  turn.prompt_digest = llm::prompt_digest(prompt_text);

  const auto start = std::chrono::steady_clock::now();
  llm::Completion reply;
  try {
    reply = llm::complete(provider, prompt_text, config, options.sleeper);
  } catch (const llm::ProviderError& e) {
    turn.latency_seconds = seconds_since(start);
    turn.attempts = e.retryable() ? config.max_retries + 1 : 1;
    turn.error = PipelineError{"ProviderError", e.what(), std::string(llm::to_string(e.kind()))};
    return record(std::move(turn));
  }
  turn.latency_seconds = reply.latency_seconds;
  turn.attempts = reply.attempt_count;
  turn.raw_responses.push_back(reply.raw_text);

  // Follow-up specifications keep phrases from earlier turns, so grounding
  // checks run against the whole conversation.
  std::string grounding(query);
  if (mode == QueryMode::FollowUp) {
    for (const auto& t : turns()) grounding += "\n" + t.query;
  }
  Analysis analysis = analyze(reply.raw_text, *dataset_, grounding);
  if (analysis.report.verdict() == Verdict::Invalid) {
    if (options.repair_rounds <= 0) {
      turn.report = std::move(analysis.report);
      turn.error = PipelineError{"InvalidSpecification",
                                 "the reply did not yield a valid specification", std::nullopt};
      return record(std::move(turn));
    }
    const RepairContext ctx{*dataset_, grounding, options.repair_rounds, options.sleeper};
    const auto repair_start = std::chrono::steady_clock::now();
    try {
      RepairResult fixed =
          repair(reply.raw_text, analysis.report, prompt_text, provider, config, ctx);
      for (std::size_t i = 1; i < fixed.trail.size(); ++i) {
        turn.raw_responses.push_back(fixed.trail[i].raw_text);
      }
      turn.latency_seconds += fixed.latency_seconds;
      turn.attempts += fixed.provider_attempts;
      analysis.specification = std::move(fixed.specification);
      analysis.report = std::move(fixed.report);
    } catch (const RepairFailed& e) {
      for (std::size_t i = 1; i < e.trail().size(); ++i) {
        turn.raw_responses.push_back(e.trail()[i].raw_text);
      }
      turn.latency_seconds += e.latency_seconds();
      turn.attempts += e.provider_attempts();
      turn.report = e.trail().back().report;
      turn.error = PipelineError{"RepairFailed", e.what(), std::nullopt};
      return record(std::move(turn));
    } catch (const llm::ProviderError& e) {
      turn.latency_seconds += seconds_since(repair_start);
      turn.attempts += e.retryable() ? config.max_retries + 1 : 1;
      turn.report = std::move(analysis.report);
      turn.error = PipelineError{"ProviderError", e.what(), std::string(llm::to_string(e.kind()))};
      return record(std::move(turn));
    }
  }

  if (options.ambiguity_candidates) {
    analysis.report.merge(
        validate_ambiguity_coverage(*analysis.specification, *options.ambiguity_candidates));
  }
  turn.specification = std::move(analysis.specification);
  turn.report = std::move(analysis.report);
  return record(std::move(turn));
}

void Session::append(Turn turn) {
  std::lock_guard lock(state_mu_);
  turns_.push_back(std::move(turn));
}

nlohmann::ordered_json Session::to_json() const {
  nlohmann::ordered_json j;
  j["id"] = id_;
  j["dataset_id"] = dataset_->id();
  j["subset_seed"] = subset_seed_;
  auto turns = nlohmann::ordered_json::array();
  for (const auto& t : this->turns()) turns.push_back(vizprompt::to_json(t));
  j["turns"] = std::move(turns);
  return j;
}

std::shared_ptr<Session> Session::from_json(const nlohmann::ordered_json& j,
                                            std::shared_ptr<const Dataset> dataset) {
  if (j.at("dataset_id").get<std::string>() != dataset->id()) {
    throw std::invalid_argument("session belongs to a different dataset");
  }
  auto s = std::make_shared<Session>(j.at("id").get<std::string>(), std::move(dataset),
                                     j.at("subset_seed").get<std::uint64_t>());
  for (const auto& t : j.at("turns")) s->append(turn_from_json(t));
  return s;
}

std::string new_session_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id;
  for (int i = 0; i < 16; ++i) id.push_back(kHex[rng() & 0xF]);
  return id;
}

std::shared_ptr<Session> create_session(std::shared_ptr<const Dataset> dataset,
                                        std::uint64_t seed) {
  return std::make_shared<Session>(new_session_id(), std::move(dataset), seed);
}

SessionStore::SessionStore(std::filesystem::path state_dir)
    : dir_(std::move(state_dir) / "sessions") {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path SessionStore::path_for(const std::string& id) const {
  return dir_ / (id + ".json");
}

std::shared_ptr<Session> SessionStore::create(std::shared_ptr<const Dataset> dataset,
                                              std::uint64_t seed) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(mu_);
    do {
      s = create_session(dataset, seed);
    } while (sessions_.count(s->id()));
    sessions_[s->id()] = s;
  }
  save(*s);
  return s;
}

std::shared_ptr<Session> SessionStore::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

void SessionStore::save(const Session& session) const {
  const auto target = path_for(session.id());
  auto tmp = target;
  tmp += ".tmp" + new_session_id();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << session.to_json().dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

std::size_t SessionStore::load_all(const DatasetRegistry& registry) {
  std::size_t loaded = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    std::stringstream buf;
    buf << in.rdbuf();
    const auto doc = nlohmann::ordered_json::parse(buf.str(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("dataset_id")) continue;
    auto dataset = registry.find(doc["dataset_id"].get<std::string>());
    if (!dataset) continue;
    auto session = Session::from_json(doc, std::move(dataset));
    std::lock_guard lock(mu_);
    sessions_[session->id()] = std::move(session);
    ++loaded;
  }
  return loaded;
}

}  // namespace vizprompt
