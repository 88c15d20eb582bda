#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizprompt/llm_client.hpp"
#include "vizprompt/prompt.hpp"
#include "vizprompt/registry.hpp"
#include "vizprompt/response.hpp"
#include "vizprompt/session.hpp"
#include "vizprompt/validate.hpp"

namespace vizprompt {

class EvaluationError : public std::runtime_error {
 public:
  enum class Kind {
    EmptyCorpus,
    UnknownDataset,
    InvalidRecord,
    MissingAnnotation,
    MissingTiebreaker,
    UnreconciledCases,
  };

  EvaluationError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string_view to_string(EvaluationError::Kind kind);

// ---- corpus ----

struct QueryCase {
  std::string case_id;
  std::string dataset_id;
  std::string query;
  QueryMode mode = QueryMode::Initial;
  std::optional<std::string> sequence_group;
  std::optional<AmbiguityCandidates> ambiguity_candidates;

  bool operator==(const QueryCase&) const = default;
};

nlohmann::ordered_json to_json(const QueryCase& c);
QueryCase query_case_from_json(const nlohmann::json& j);

/// One QueryCase per non-blank line. Throws EvaluationError(InvalidRecord)
/// with the line number on bad input, duplicate case ids, or a FollowUp
/// case without a sequence_group.
std::vector<QueryCase> parse_corpus(std::string_view jsonl);
std::vector<QueryCase> load_corpus(const std::filesystem::path& path);

// ---- annotations ----

enum class Label { Accurate, Inaccurate, NoOutput };

enum class Reason {
  MissingTask,
  MissingAttribute,
  IncorrectAttribute,
  MalformedOutput,
  InvalidVegaLite,
  Other,
};

std::string_view to_string(Label label);
std::string_view to_string(Reason reason);
std::optional<Label> parse_label(std::string_view text);
std::optional<Reason> parse_reason(std::string_view text);

/// Inaccurate needs at least one reason; Accurate must have none.
struct Annotation {
  std::string case_id;
  std::string annotator_id;
  Label label = Label::Accurate;
  std::vector<Reason> reasons;
  std::optional<std::string> note;

  bool operator==(const Annotation&) const = default;
};

nlohmann::ordered_json to_json(const Annotation& a);
Annotation annotation_from_json(const nlohmann::json& j);
std::vector<Annotation> parse_annotations(std::string_view jsonl);
std::vector<Annotation> load_annotations(const std::filesystem::path& path);

// ---- runs ----

enum class Outcome { Valid, ValidWithWarnings, Failed, BrokenChain };

std::string_view to_string(Outcome outcome);
std::optional<Outcome> parse_outcome(std::string_view text);

struct RunRecord {
  std::string case_id;
  std::string dataset_id;
  std::string query;
  QueryMode mode = QueryMode::Initial;
  std::optional<std::string> sequence_group;
  Outcome outcome = Outcome::Failed;
  double latency_seconds = 0.0;
  int attempts = 0;
  ValidationReport report;
  std::optional<AnalyticSpecification> specification;
  /// Pipeline error code for Failed, "BrokenChain" for BrokenChain.
  std::optional<std::string> error_code;
  std::optional<std::string> note;

  bool operator==(const RunRecord&) const = default;
};

struct Reconciliation {
  std::string case_id;
  /// annotator_id -> label, primary annotators only.
  std::map<std::string, Label> labels;
  Label final_label = Label::Accurate;
  bool tiebreaker_used = false;

  bool operator==(const Reconciliation&) const = default;
};

/// Exact accurate/total ratio; `hundredths` is the percentage truncated to
/// two decimals and scaled by 100 (87.02% -> 8702).
struct Accuracy {
  std::uint64_t accurate = 0;
  std::uint64_t total = 0;

  double ratio() const { return total == 0 ? 0.0 : double(accurate) / double(total); }
  std::uint64_t hundredths() const;
  /// "87.02".
  std::string percent() const;

  bool operator==(const Accuracy&) const = default;
};

struct RunReport {
  std::string run_id;
  std::uint64_t seed = 0;
  std::vector<RunRecord> records;
  std::vector<Reconciliation> reconciliation;
  /// Filled by `finalize` once every record is reconciled.
  std::map<std::string, Accuracy> per_dataset_accuracy;
  std::optional<Accuracy> overall_accuracy;
  double mean_latency_seconds = 0.0;

  bool operator==(const RunReport&) const = default;
};

nlohmann::ordered_json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const Reconciliation& r);
Reconciliation reconciliation_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const RunReport& r);
RunReport run_report_from_json(const nlohmann::ordered_json& j);
RunReport load_run_report(const std::filesystem::path& path);

struct RunOptions {
  std::uint64_t seed = 0;
  /// Sequence groups run in parallel up to this many at a time; 0 means no
  /// cap.
  std::size_t max_concurrency = 1;
  PipelineOptions pipeline;
};

/// Replays the corpus. Cases sharing a sequence_group run in corpus order
/// through one fresh session; every other case gets its own session. A
/// FollowUp whose predecessor produced no specification is recorded as
/// BrokenChain without calling the provider. Records come back in corpus
/// order. Throws EvaluationError for an empty corpus or an unknown dataset.
RunReport run_corpus(const std::vector<QueryCase>& corpus, const DatasetRegistry& registry,
                     llm::Provider& provider, const llm::ProviderConfig& config,
                     const RunOptions& options = {});

/// Final label per case. Annotations from anyone but `tiebreaker_id` are
/// primary; each case needs exactly two. When the two labels differ the
/// tiebreaker's label wins. `case_ids` lists the cases that must be covered;
/// when empty, the cases named in `annotations` are used.
std::vector<Reconciliation> reconcile(const std::vector<Annotation>& annotations,
                                      const std::string& tiebreaker_id,
                                      const std::vector<std::string>& case_ids = {});

struct Metrics {
  Accuracy overall;
  std::map<std::string, Accuracy> per_dataset;
  double mean_latency_seconds = 0.0;
  /// Final label -> count.
  std::map<std::string, std::uint64_t> label_counts;
  /// Outcome -> count.
  std::map<std::string, std::uint64_t> outcome_counts;
  std::uint64_t tiebreaks = 0;
};

/// Pure function of the report; record order does not matter. Throws
/// EvaluationError(UnreconciledCases) if any record lacks a final label.
Metrics score(const RunReport& report);

nlohmann::ordered_json to_json(const Metrics& m);

/// Attaches `reconciliation`, then fills the accuracy and latency fields
/// from `score`.
void finalize(RunReport& report, std::vector<Reconciliation> reconciliation);

}  // namespace vizprompt
