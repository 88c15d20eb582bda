#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vizprompt/dataset.hpp"
#include "vizprompt/response.hpp"

namespace vizprompt {

enum class QueryMode { Initial, FollowUp };

std::string_view to_string(QueryMode mode);
std::optional<QueryMode> parse_query_mode(std::string_view text);

struct PromptConfig {
  QueryMode mode = QueryMode::Initial;
  /// Appends the prose-suppression sentence. Off = explanation mode.
  bool json_only = true;
  std::size_t token_budget = 8000;
  std::uint64_t seed = 0;
  std::string taxonomy_version = "v5";

  bool operator==(const PromptConfig&) const = default;
};

/// Prompt sections, in the order they are always emitted.
enum class SectionId {
  TaskTaxonomy,
  FollowUpTaxonomy,
  Instructions,
  ResponseSchemaExample,
  DataSubset,
  PreviousSpecification,
  Queries,
};

std::string_view to_string(SectionId id);

struct PromptSection {
  SectionId id;
  std::string body;

  bool operator==(const PromptSection&) const = default;
};

struct AssembledPrompt {
  std::vector<PromptSection> sections;
  std::size_t estimated_tokens = 0;
  PromptConfig config;

  const PromptSection* section(SectionId id) const;

  bool operator==(const AssembledPrompt&) const = default;
};

class PromptError : public std::runtime_error {
 public:
  enum class Kind { EmptyQuery, MissingPreviousSpec, TokenBudgetExceeded, UnsupportedVersion };

  PromptError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string_view to_string(PromptError::Kind kind);

/// Key instruction for Initial prompts, embedded verbatim.
extern const std::string_view kInitialKeyInstruction;
/// Key instruction for FollowUp prompts, embedded verbatim.
extern const std::string_view kFollowUpKeyInstruction;
/// Appended to the instructions when json_only is set.
extern const std::string_view kJsonOnlyInstruction;
/// Lead-in line of the response-schema section.
extern const std::string_view kResponseSchemaLeadIn;

/// Exemplar response object with per-property inline instructions.
std::string_view response_exemplar();

/// Composes the prompt. `previous` is required in FollowUp mode and ignored
/// in Initial mode.
///
/// Throws PromptError: EmptyQuery when `queries` is empty or any query is
/// blank, MissingPreviousSpec for FollowUp without `previous`,
/// TokenBudgetExceeded when the rendered prompt is estimated above
/// `config.token_budget`.
AssembledPrompt assemble(const DataSubset& subset, std::span<const std::string> queries,
                         const PromptConfig& config,
                         const AnalyticSpecification* previous = nullptr);

/// Convenience overload that draws the subset with `config.seed`.
AssembledPrompt assemble(const Dataset& dataset, std::span<const std::string> queries,
                         const PromptConfig& config,
                         const AnalyticSpecification* previous = nullptr);

/// Each section as `# [section_id]` followed by its body; sections are
/// separated by a blank line and the text ends with a newline.
std::string render(const AssembledPrompt& prompt);

/// ceil(bytes / 4).
std::size_t estimate_tokens(std::string_view text);

}  // namespace vizprompt
