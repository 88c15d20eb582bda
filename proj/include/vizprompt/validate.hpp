#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vizprompt/dataset.hpp"
#include "vizprompt/response.hpp"

namespace vizprompt {

enum class Severity { Error, Warning };

enum class FindingCode {
  MalformedJson,
  UnknownAttribute,
  UngroundedPhrase,
  UnknownTask,
  InvalidVegaLite,
  FieldTitleMismatch,
  EmptyVisList,
  TaskAttributeOrphan,
  AmbiguityUncovered,
};

enum class Verdict { Valid, ValidWithWarnings, Invalid };

std::string_view to_string(Severity severity);
std::string_view to_string(FindingCode code);
std::string_view to_string(Verdict verdict);
std::optional<Severity> parse_severity(std::string_view text);
std::optional<FindingCode> parse_finding_code(std::string_view text);

struct Finding {
  Severity severity;
  FindingCode code;
  std::string detail;

  bool operator==(const Finding&) const = default;
};

/// Invalid iff any Error finding, ValidWithWarnings iff only warnings.
Verdict verdict_for(const std::vector<Finding>& findings);

/// Findings list whose verdict is always derived from its contents.
class ValidationReport {
 public:
  ValidationReport() = default;
  explicit ValidationReport(std::vector<Finding> findings) : findings_(std::move(findings)) {}

  void add(Severity severity, FindingCode code, std::string detail);
  void merge(const ValidationReport& other);

  const std::vector<Finding>& findings() const { return findings_; }
  Verdict verdict() const { return verdict_for(findings_); }
  std::vector<FindingCode> codes() const;
  std::size_t count(FindingCode code) const;
  bool has(FindingCode code) const { return count(code) > 0; }

  bool operator==(const ValidationReport&) const = default;

 private:
  std::vector<Finding> findings_;
};

nlohmann::ordered_json to_json(const ValidationReport& report);
ValidationReport report_from_json(const nlohmann::json& j);

/// Lowercase, alphanumerics only. Used for title and task-name matching.
std::string normalize_label(std::string_view text);

/// Runs the structural and grounding checks in a fixed order:
///  1. non-derived attributeMap keys exist in the dataset (UnknownAttribute)
///  2. query phrases occur in the query, case-insensitively (UngroundedPhrase)
///  3. taskMap keys name known tasks (UnknownTask)
///  4. task entries reference only attributeMap keys (TaskAttributeOrphan)
///  5. every chart has a known mark, known channels and resolvable fields
///     (InvalidVegaLite)
///  6. an axis title naming a different attribute than its field, ignoring
///     aggregation words like "Total" (FieldTitleMismatch, warning)
///  7. visList is non-empty (EmptyVisList)
/// Derived attributes skip the dataset lookups but need a derivationNote that
/// names at least one existing attribute.
ValidationReport validate(const AnalyticSpecification& spec, const Dataset& dataset,
                          std::string_view query);

/// phrase -> candidate attribute names.
using AmbiguityCandidates = std::map<std::string, std::vector<std::string>>;

/// One AmbiguityUncovered warning per candidate attribute that no chart
/// encodes.
ValidationReport validate_ambiguity_coverage(const AnalyticSpecification& spec,
                                             const AmbiguityCandidates& candidates);

struct Analysis {
  std::optional<AnalyticSpecification> specification;
  ValidationReport report;
};

/// parse_specification + validate; a parse failure becomes a MalformedJson
/// finding instead of an exception.
Analysis analyze(std::string_view raw, const Dataset& dataset, std::string_view query);

}  // namespace vizprompt
