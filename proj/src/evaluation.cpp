#include "vizprompt/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace vizprompt {

namespace {

using Kind = EvaluationError::Kind;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

template <typename F>
void for_each_jsonl(std::string_view text, F&& on_line) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    const auto line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      throw EvaluationError(Kind::InvalidRecord,
                            "line " + std::to_string(line_no) + ": not a JSON object");
    }
    try {
      on_line(doc);
    } catch (const EvaluationError&) {
      throw;
    } catch (const std::exception& e) {
      throw EvaluationError(Kind::InvalidRecord,
                            "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

template <typename Json>
std::optional<std::string> opt_string(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].template get<std::string>();
}

}  // namespace

std::string_view to_string(EvaluationError::Kind kind) {
  switch (kind) {
    case Kind::EmptyCorpus: return "EmptyCorpus";
    case Kind::UnknownDataset: return "UnknownDataset";
    case Kind::InvalidRecord: return "InvalidRecord";
    case Kind::MissingAnnotation: return "MissingAnnotation";
    case Kind::MissingTiebreaker: return "MissingTiebreaker";
    case Kind::UnreconciledCases: return "UnreconciledCases";
  }
  return "";
}

nlohmann::ordered_json to_json(const QueryCase& c) {
  nlohmann::ordered_json j;
  j["case_id"] = c.case_id;
  j["dataset_id"] = c.dataset_id;
  j["query"] = c.query;
  j["mode"] = std::string(to_string(c.mode));
  if (c.sequence_group) j["sequence_group"] = *c.sequence_group;
  if (c.ambiguity_candidates) j["ambiguity_candidates"] = *c.ambiguity_candidates;
  return j;
}

QueryCase query_case_from_json(const nlohmann::json& j) {
  QueryCase c;
  c.case_id = j.at("case_id").get<std::string>();
  c.dataset_id = j.at("dataset_id").get<std::string>();
  c.query = j.at("query").get<std::string>();
  const auto mode = parse_query_mode(j.value("mode", "Initial"));
  if (!mode) throw std::invalid_argument("unknown mode");
  c.mode = *mode;
  c.sequence_group = opt_string(j, "sequence_group");
  if (j.contains("ambiguity_candidates") && !j["ambiguity_candidates"].is_null()) {
    c.ambiguity_candidates = j["ambiguity_candidates"].get<AmbiguityCandidates>();
  }
  if (c.case_id.empty()) throw std::invalid_argument("empty case_id");
  if (c.mode == QueryMode::FollowUp && !c.sequence_group) {
    throw std::invalid_argument("FollowUp case " + c.case_id + " has no sequence_group");
  }
  return c;
}

std::vector<QueryCase> parse_corpus(std::string_view jsonl) {
  std::vector<QueryCase> out;
  std::set<std::string> ids;
  for_each_jsonl(jsonl, [&](const nlohmann::json& doc) {
    QueryCase c = query_case_from_json(doc);
    if (!ids.insert(c.case_id).second) {
      throw std::invalid_argument("duplicate case_id " + c.case_id);
    }
    out.push_back(std::move(c));
  });
  return out;
}

std::vector<QueryCase> load_corpus(const std::filesystem::path& path) {
  return parse_corpus(read_file(path));
}

std::string_view to_string(Label label) {
  switch (label) {
    case Label::Accurate: return "Accurate";
    case Label::Inaccurate: return "Inaccurate";
    case Label::NoOutput: return "NoOutput";
  }
  return "";
}

std::string_view to_string(Reason reason) {
  switch (reason) {
    case Reason::MissingTask: return "MissingTask";
    case Reason::MissingAttribute: return "MissingAttribute";
    case Reason::IncorrectAttribute: return "IncorrectAttribute";
    case Reason::MalformedOutput: return "MalformedOutput";
    case Reason::InvalidVegaLite: return "InvalidVegaLite";
    case Reason::Other: return "Other";
  }
  return "";
}

std::optional<Label> parse_label(std::string_view text) {
  for (auto l : {Label::Accurate, Label::Inaccurate, Label::NoOutput}) {
    if (to_string(l) == text) return l;
  }
  return std::nullopt;
}

std::optional<Reason> parse_reason(std::string_view text) {
  for (auto r : {Reason::MissingTask, Reason::MissingAttribute, Reason::IncorrectAttribute,
                 Reason::MalformedOutput, Reason::InvalidVegaLite, Reason::Other}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

nlohmann::ordered_json to_json(const Annotation& a) {
  nlohmann::ordered_json j;
  j["case_id"] = a.case_id;
  j["annotator_id"] = a.annotator_id;
  j["label"] = std::string(to_string(a.label));
  auto reasons = nlohmann::ordered_json::array();
  for (auto r : a.reasons) reasons.push_back(std::string(to_string(r)));
  j["reasons"] = std::move(reasons);
  if (a.note) j["note"] = *a.note;
  return j;
}

Annotation annotation_from_json(const nlohmann::json& j) {
  Annotation a;
  a.case_id = j.at("case_id").get<std::string>();
  a.annotator_id = j.at("annotator_id").get<std::string>();
  const auto label = parse_label(j.at("label").get<std::string>());
  if (!label) throw std::invalid_argument("unknown label");
  a.label = *label;
  if (j.contains("reasons")) {
    for (const auto& r : j["reasons"]) {
      const auto reason = parse_reason(r.get<std::string>());
      if (!reason) throw std::invalid_argument("unknown reason " + r.dump());
      a.reasons.push_back(*reason);
    }
  }
  a.note = opt_string(j, "note");
  if (a.label == Label::Inaccurate && a.reasons.empty()) {
    throw std::invalid_argument("Inaccurate annotation for " + a.case_id + " needs a reason");
  }
  if (a.label == Label::Accurate && !a.reasons.empty()) {
    throw std::invalid_argument("Accurate annotation for " + a.case_id + " cannot have reasons");
  }
  return a;
}

std::vector<Annotation> parse_annotations(std::string_view jsonl) {
  std::vector<Annotation> out;
  for_each_jsonl(jsonl, [&](const nlohmann::json& doc) { out.push_back(annotation_from_json(doc)); });
  return out;
}

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
  return parse_annotations(read_file(path));
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Valid: return "Valid";
    case Outcome::ValidWithWarnings: return "ValidWithWarnings";
    case Outcome::Failed: return "Failed";
    case Outcome::BrokenChain: return "BrokenChain";
  }
  return "";
}

std::optional<Outcome> parse_outcome(std::string_view text) {
  for (auto o : {Outcome::Valid, Outcome::ValidWithWarnings, Outcome::Failed,
                 Outcome::BrokenChain}) {
    if (to_string(o) == text) return o;
  }
  return std::nullopt;
}

std::uint64_t Accuracy::hundredths() const {
  return total == 0 ? 0 : accurate * 10000 / total;
}

std::string Accuracy::percent() const {
  const auto h = hundredths();
  const auto frac = h % 100;
  return std::to_string(h / 100) + (frac < 10 ? ".0" : ".") + std::to_string(frac);
}

namespace {

nlohmann::ordered_json accuracy_json(const Accuracy& a) {
  nlohmann::ordered_json j;
  j["accurate"] = a.accurate;
  j["total"] = a.total;
  j["percent"] = a.percent();
  return j;
}

Accuracy accuracy_from_json(const nlohmann::json& j) {
  return Accuracy{j.at("accurate").get<std::uint64_t>(), j.at("total").get<std::uint64_t>()};
}

}  // namespace

nlohmann::ordered_json to_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["case_id"] = r.case_id;
  j["dataset_id"] = r.dataset_id;
  j["query"] = r.query;
  j["mode"] = std::string(to_string(r.mode));
  j["sequence_group"] = r.sequence_group ? nlohmann::ordered_json(*r.sequence_group) : nlohmann::ordered_json(nullptr);
  j["outcome"] = std::string(to_string(r.outcome));
  j["latency_seconds"] = r.latency_seconds;
  j["attempts"] = r.attempts;
  j["report"] = to_json(r.report);
  if (r.specification) {
    j["specification"] = to_json(*r.specification);
    j["explanation"] = r.specification->explanation
                           ? nlohmann::ordered_json(*r.specification->explanation)
                           : nlohmann::ordered_json(nullptr);
  } else {
    j["specification"] = nullptr;
  }
  j["error_code"] = r.error_code ? nlohmann::ordered_json(*r.error_code) : nlohmann::ordered_json(nullptr);
  j["note"] = r.note ? nlohmann::ordered_json(*r.note) : nlohmann::ordered_json(nullptr);
  return j;
}

RunRecord run_record_from_json(const nlohmann::ordered_json& j) {
  RunRecord r;
  r.case_id = j.at("case_id").get<std::string>();
  r.dataset_id = j.at("dataset_id").get<std::string>();
  r.query = j.value("query", "");
  const auto mode = parse_query_mode(j.value("mode", "Initial"));
  if (!mode) throw std::invalid_argument("unknown mode");
  r.mode = *mode;
  r.sequence_group = opt_string(j, "sequence_group");
  const auto outcome = parse_outcome(j.at("outcome").get<std::string>());
  if (!outcome) throw std::invalid_argument("unknown outcome");
  r.outcome = *outcome;
  r.latency_seconds = j.at("latency_seconds").get<double>();
  r.attempts = j.value("attempts", 0);
  r.report = report_from_json(j.at("report"));
  if (j.contains("specification") && !j["specification"].is_null()) {
    r.specification = specification_from_json(j["specification"]);
    if (auto e = opt_string(j, "explanation")) r.specification->explanation = std::move(e);
  }
  r.error_code = opt_string(j, "error_code");
  r.note = opt_string(j, "note");
  return r;
}

nlohmann::ordered_json to_json(const Reconciliation& r) {
  nlohmann::ordered_json j;
  j["case_id"] = r.case_id;
  nlohmann::ordered_json labels = nlohmann::ordered_json::object();
  for (const auto& [who, label] : r.labels) labels[who] = std::string(to_string(label));
  j["annotator_labels"] = std::move(labels);
  j["final_label"] = std::string(to_string(r.final_label));
  j["tiebreaker_used"] = r.tiebreaker_used;
  return j;
}

Reconciliation reconciliation_from_json(const nlohmann::json& j) {
  Reconciliation r;
  r.case_id = j.at("case_id").get<std::string>();
  for (const auto& [who, label] : j.at("annotator_labels").items()) {
    const auto l = parse_label(label.get<std::string>());
    if (!l) throw std::invalid_argument("unknown label");
    r.labels[who] = *l;
  }
  const auto final_label = parse_label(j.at("final_label").get<std::string>());
  if (!final_label) throw std::invalid_argument("unknown final label");
  r.final_label = *final_label;
  r.tiebreaker_used = j.at("tiebreaker_used").get<bool>();
  return r;
}

nlohmann::ordered_json to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["run_id"] = r.run_id;
  j["seed"] = r.seed;
  auto records = nlohmann::ordered_json::array();
  for (const auto& rec : r.records) records.push_back(to_json(rec));
  j["records"] = std::move(records);
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [id, acc] : r.per_dataset_accuracy) per[id] = accuracy_json(acc);
  j["per_dataset_accuracy"] = std::move(per);
  j["overall_accuracy"] =
      r.overall_accuracy ? accuracy_json(*r.overall_accuracy) : nlohmann::ordered_json(nullptr);
  j["mean_latency_seconds"] = r.mean_latency_seconds;
  auto recon = nlohmann::ordered_json::array();
  for (const auto& rc : r.reconciliation) recon.push_back(to_json(rc));
  j["reconciliation"] = std::move(recon);
  return j;
}

RunReport run_report_from_json(const nlohmann::ordered_json& j) {
  RunReport r;
  r.run_id = j.at("run_id").get<std::string>();
  r.seed = j.value("seed", std::uint64_t{0});
  for (const auto& rec : j.at("records")) r.records.push_back(run_record_from_json(rec));
  if (j.contains("per_dataset_accuracy")) {
    for (const auto& [id, acc] : j["per_dataset_accuracy"].items()) {
      r.per_dataset_accuracy[id] = accuracy_from_json(acc);
    }
  }
  if (j.contains("overall_accuracy") && !j["overall_accuracy"].is_null()) {
    r.overall_accuracy = accuracy_from_json(j["overall_accuracy"]);
  }
  r.mean_latency_seconds = j.value("mean_latency_seconds", 0.0);
  if (j.contains("reconciliation")) {
    for (const auto& rc : j["reconciliation"]) {
      r.reconciliation.push_back(reconciliation_from_json(rc));
    }
  }
  return r;
}

RunReport load_run_report(const std::filesystem::path& path) {
  const auto doc = nlohmann::ordered_json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw EvaluationError(Kind::InvalidRecord, path.string() + " is not a JSON object");
  }
  try {
    return run_report_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw EvaluationError(Kind::InvalidRecord, path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw EvaluationError(Kind::InvalidRecord, path.string() + ": " + e.what());
  }
}

namespace {

RunRecord base_record(const QueryCase& c) {
  RunRecord r;
  r.case_id = c.case_id;
  r.dataset_id = c.dataset_id;
  r.query = c.query;
  r.mode = c.mode;
  r.sequence_group = c.sequence_group;
  return r;
}

/// Runs the cases (indices into the corpus) of one group through a fresh
/// session.
void run_group(const std::vector<QueryCase>& corpus, const std::vector<std::size_t>& members,
               const std::shared_ptr<const Dataset>& dataset, llm::Provider& provider,
               const llm::ProviderConfig& config, const RunOptions& options,
               std::vector<RunRecord>& out) {
  Session session(new_session_id(), dataset, options.seed);
  bool predecessor_ok = false;
  for (std::size_t idx : members) {
    const QueryCase& c = corpus[idx];
    RunRecord rec = base_record(c);
    if (c.mode == QueryMode::FollowUp && !predecessor_ok) {
      rec.outcome = Outcome::BrokenChain;
      rec.error_code = "BrokenChain";
      rec.note = "predecessor in sequence group produced no specification";
      out[idx] = std::move(rec);
      continue;
    }
    PipelineOptions pipeline = options.pipeline;
    pipeline.ambiguity_candidates = c.ambiguity_candidates;
    Turn turn = session.ask(c.query, c.mode, provider, config, pipeline);
    rec.latency_seconds = turn.latency_seconds;
    rec.attempts = turn.attempts;
    rec.report = turn.report;
    rec.specification = turn.specification;
    if (turn.specification) {
      rec.outcome = turn.report.verdict() == Verdict::Valid ? Outcome::Valid
                                                            : Outcome::ValidWithWarnings;
    } else {
      rec.outcome = Outcome::Failed;
      if (turn.error) {
        rec.error_code = turn.error->code;
        rec.note = turn.error->message;
      }
    }
    predecessor_ok = turn.succeeded();
    out[idx] = std::move(rec);
  }
}

}  // namespace

RunReport run_corpus(const std::vector<QueryCase>& corpus, const DatasetRegistry& registry,
                     llm::Provider& provider, const llm::ProviderConfig& config,
                     const RunOptions& options) {
  if (corpus.empty()) throw EvaluationError(Kind::EmptyCorpus, "corpus has no cases");

  std::map<std::string, std::shared_ptr<const Dataset>> datasets;
  for (const auto& c : corpus) {
    if (datasets.count(c.dataset_id)) continue;
    auto ds = registry.find(c.dataset_id);
    if (!ds) {
      throw EvaluationError(Kind::UnknownDataset,
                            "case " + c.case_id + " names unknown dataset " + c.dataset_id);
    }
    datasets[c.dataset_id] = std::move(ds);
  }

  // Group order follows first appearance in the corpus.
  std::vector<std::vector<std::size_t>> groups;
  std::map<std::string, std::size_t> group_index;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& g = corpus[i].sequence_group;
    if (!g) {
      groups.push_back({i});
      continue;
    }
    auto [it, fresh] = group_index.try_emplace(*g, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  for (const auto& members : groups) {
    const auto& first = corpus[members.front()].dataset_id;
    for (std::size_t idx : members) {
      if (corpus[idx].dataset_id != first) {
        throw EvaluationError(Kind::InvalidRecord,
                              "sequence group mixes datasets at case " + corpus[idx].case_id);
      }
    }
  }

  RunReport report;
  report.run_id = "run-" + new_session_id();
  report.seed = options.seed;
  report.records.resize(corpus.size());

  const std::size_t workers =
      options.max_concurrency == 0 ? groups.size() : std::min(options.max_concurrency, groups.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t g = next++; g < groups.size(); g = next++) {
      const auto& members = groups[g];
      run_group(corpus, members, datasets.at(corpus[members.front()].dataset_id), provider,
                config, options, report.records);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mu;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        try {
          work();
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  double sum = 0.0;
  for (const auto& r : report.records) sum += r.latency_seconds;
  report.mean_latency_seconds = sum / double(report.records.size());
  return report;
}

std::vector<Reconciliation> reconcile(const std::vector<Annotation>& annotations,
                                      const std::string& tiebreaker_id,
                                      const std::vector<std::string>& case_ids) {
  std::map<std::string, std::map<std::string, Label>> primary;
  std::map<std::string, Label> tiebreaks;
  std::vector<std::string> order;
  for (const auto& a : annotations) {
    if (!primary.count(a.case_id) && !tiebreaks.count(a.case_id)) order.push_back(a.case_id);
    if (a.annotator_id == tiebreaker_id) {
      tiebreaks[a.case_id] = a.label;
    } else {
      primary[a.case_id][a.annotator_id] = a.label;
    }
  }
  if (!case_ids.empty()) order = case_ids;

  std::vector<Reconciliation> out;
  for (const auto& id : order) {
    const auto it = primary.find(id);
    const std::size_t n = it == primary.end() ? 0 : it->second.size();
    if (n != 2) {
      throw EvaluationError(Kind::MissingAnnotation,
                            "case " + id + " has " + std::to_string(n) +
                                " primary annotations, expected 2");
    }
    Reconciliation r;
    r.case_id = id;
    r.labels = it->second;
    const Label a = r.labels.begin()->second;
    const Label b = r.labels.rbegin()->second;
    if (a == b) {
      r.final_label = a;
    } else {
      const auto tb = tiebreaks.find(id);
      if (tb == tiebreaks.end()) {
        throw EvaluationError(Kind::MissingTiebreaker,
                              "case " + id + " is disputed and has no annotation from " +
                                  tiebreaker_id);
      }
      r.final_label = tb->second;
      r.tiebreaker_used = true;
    }
    out.push_back(std::move(r));
  }
  return out;
}

Metrics score(const RunReport& report) {
  std::map<std::string, const Reconciliation*> final_labels;
  for (const auto& r : report.reconciliation) final_labels[r.case_id] = &r;

  Metrics m;
  std::vector<std::string> missing;
  double latency_sum = 0.0;
  for (const auto& rec : report.records) {
    const auto it = final_labels.find(rec.case_id);
    if (it == final_labels.end()) {
      missing.push_back(rec.case_id);
      continue;
    }
    const bool accurate = it->second->final_label == Label::Accurate;
    m.overall.total += 1;
    m.overall.accurate += accurate;
    auto& per = m.per_dataset[rec.dataset_id];
    per.total += 1;
    per.accurate += accurate;
    latency_sum += rec.latency_seconds;
    m.label_counts[std::string(to_string(it->second->final_label))] += 1;
    m.outcome_counts[std::string(to_string(rec.outcome))] += 1;
    m.tiebreaks += it->second->tiebreaker_used;
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw EvaluationError(Kind::UnreconciledCases, "no final label for: " + list);
  }
  m.mean_latency_seconds = m.overall.total == 0 ? 0.0 : latency_sum / double(m.overall.total);
  return m;
}

nlohmann::ordered_json to_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["overall_accuracy"] = accuracy_json(m.overall);
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [id, acc] : m.per_dataset) per[id] = accuracy_json(acc);
  j["per_dataset_accuracy"] = std::move(per);
  j["mean_latency_seconds"] = m.mean_latency_seconds;
  j["label_counts"] = m.label_counts;
  j["outcome_counts"] = m.outcome_counts;
  j["tiebreaks"] = m.tiebreaks;
  return j;
}

void finalize(RunReport& report, std::vector<Reconciliation> reconciliation) {
  report.reconciliation = std::move(reconciliation);
  const Metrics m = score(report);
  report.overall_accuracy = m.overall;
  report.per_dataset_accuracy = m.per_dataset;
  report.mean_latency_seconds = m.mean_latency_seconds;
}

}  // namespace vizprompt
