#include "vizprompt/prompt.hpp"

#include <algorithm>

#include "vizprompt/taxonomy.hpp"

namespace vizprompt {

const std::string_view kInitialKeyInstruction =
    "classify the below natural language queries into the respective analytic tasks they map "
    "to. There can be one or more analytic tasks detected in the input natural language query. "
    "Return the visualization type in the form of a Vega-Lite specification where it reads data "
    "from the url above.";

const std::string_view kFollowUpKeyInstruction =
    "classify the below natural language query into the respective follow-up operations they "
    "map to. Utilize the previous analytic specification (including the attributeMap, taskMap, "
    "and visList) and modify this specification to reflect the changes specified and requested "
    "in the natural language query. Return the visualization type in the form of a Vega-Lite "
    "specification where it reads data from the url above.";

const std::string_view kJsonOnlyInstruction =
    "Do not include any additional prose in your response. I only want to see the JSON.";

const std::string_view kResponseSchemaLeadIn =
    "Here is the JSON object that the response should be returned as:";

namespace {

constexpr std::string_view kExemplar = R"json({
  "attributeMap": {
    "<attribute name>": {
      "queryPhrase": "<the exact phrase of the query that refers to this attribute>",
      "isDerived": false,
      "derivationNote": "<only when isDerived is true: how the attribute is computed from existing attributes, naming them>"
    }
  },
  "taskMap": {
    "<task id from the analytic task JSON, e.g. derived_value>": [
      {
        "attributes": ["<attribute names from the attributeMap>"],
        "operator": "<aggregate or filter operator if any, e.g. AVG, SUM, GT, EQ, IN>",
        "values": ["<filter values if any>"],
        "inferenceType": "<explicit if the query names the task, implicit if it was inferred>"
      }
    ]
  },
  "visList": [
    {
      "attributes": ["<attributes encoded in this visualization>"],
      "tasks": ["<task ids this visualization answers>"],
      "vlSpec": {
        "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
        "data": {"url": "<the dataset url above>"},
        "mark": "<one of bar, line, point, tick, arc, area, boxplot, circle>",
        "transform": ["<filter and calculate transforms, if any>"],
        "encoding": {
          "<one of x, y, color, size, row, column, theta>": {
            "field": "<attribute name from the attributeMap>",
            "type": "<quantitative, nominal, ordinal or temporal>",
            "aggregate": "<sum, mean, count, min or max, if any>",
            "axis": {"title": "<title naming exactly the encoded field and its aggregate>"}
          }
        }
      }
    }
  ]
})json";

constexpr std::string_view kTaskTaxonomyLeadIn =
    "Here is a JSON array of low-level analytic tasks. Each task has a description, a pro forma "
    "abstract, example queries, the datatypes each visual encoding accepts, a description of how "
    "to express those encodings in Vega-Lite, and the recommended visualizations (Vega-Lite "
    "marks):";

constexpr std::string_view kFollowUpTaxonomyLeadIn =
    "Here is a JSON array of follow-up operations. Each permutation of an action (Add, Remove, "
    "Replace) and a target (Attribute, Task, VisualizationType) lists the steps to apply it to a "
    "previous analytic specification and example follow-up queries:";

constexpr std::string_view kAttributeDetection =
    "Detect the dataset attributes each query refers to using the column names and sample rows "
    "of the data subset below, and record the phrase of the query that refers to each attribute. "
    "When the query asks for a value computed from existing attributes, add a derived attribute "
    "to the attributeMap with isDerived set to true and a derivationNote, and compute it with a "
    "calculate transform.";

constexpr std::string_view kFullySpecified =
    "Fully specified queries: the query names at least one attribute, one analytic task, and one "
    "visualization type. Follow the instruction above and keep every named component.";

constexpr std::string_view kUnderspecified =
    "Underspecified queries: the query does not explicitly reference an analytic task or a "
    "visualization type. Use the design guidelines of the analytic task JSON to infer the task "
    "that is best suited with the detected attributes' datatypes, and generate a visualization "
    "specification using this inferred task and detected attributes.";

constexpr std::string_view kAmbiguous =
    "Ambiguous queries: the query contains a phrase with partial references to multiple data "
    "attributes. Output multiple visualizations, one for every attribute that the phrase "
    "potentially refers to, and add each of those attributes to the attributeMap with that "
    "phrase.";

constexpr std::string_view kFollowUpBlock =
    "Follow-up queries: the query adds, removes, or replaces attributes, analytic tasks, or "
    "visualization types of a previous analytic specification. Such queries are only processed "
    "when a previous analytic specification is included at the end of this prompt; use the "
    "follow-up operation JSON above to decide which operation the query maps to.";

std::string fenced(std::string_view lang, std::string_view body) {
  std::string out = "```";
  out += lang;
  out += '\n';
  out += body;
  out += "\n```";
  return out;
}

std::string instructions(const DataSubset& subset, const PromptConfig& config) {
  std::string out = "The dataset is available at the url: " + subset.data_url + "\n\n";
  if (config.mode == QueryMode::Initial) {
    out += "Using the analytic task JSON above, ";
    out += kInitialKeyInstruction;
  } else {
    out += "Using the follow-up operation JSON above, ";
    out += kFollowUpKeyInstruction;
  }
  for (std::string_view block :
       {kAttributeDetection, kFullySpecified, kUnderspecified, kAmbiguous, kFollowUpBlock}) {
    out += "\n\n";
    out += block;
  }
  if (config.json_only) {
    out += "\n\n";
    out += kJsonOnlyInstruction;
  }
  return out;
}

std::string queries_body(std::span<const std::string> queries) {
  std::string out = queries.size() == 1 ? "Natural language query:" : "Natural language queries:";
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out += "\n" + std::to_string(i + 1) + ". " + queries[i];
  }
  return out;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::string_view to_string(QueryMode mode) {
  return mode == QueryMode::Initial ? "Initial" : "FollowUp";
}

std::optional<QueryMode> parse_query_mode(std::string_view text) {
  if (text == "Initial" || text == "initial") return QueryMode::Initial;
  if (text == "FollowUp" || text == "follow_up" || text == "followup" || text == "follow-up") {
    return QueryMode::FollowUp;
  }
  return std::nullopt;
}

std::string_view to_string(SectionId id) {
  switch (id) {
    case SectionId::TaskTaxonomy: return "task_taxonomy";
    case SectionId::FollowUpTaxonomy: return "follow_up_taxonomy";
    case SectionId::Instructions: return "instructions";
    case SectionId::ResponseSchemaExample: return "response_schema_example";
    case SectionId::DataSubset: return "data_subset";
    case SectionId::PreviousSpecification: return "previous_specification";
    case SectionId::Queries: return "queries";
  }
  return "";
}

std::string_view to_string(PromptError::Kind kind) {
  switch (kind) {
    case PromptError::Kind::EmptyQuery: return "EmptyQuery";
    case PromptError::Kind::MissingPreviousSpec: return "MissingPreviousSpec";
    case PromptError::Kind::TokenBudgetExceeded: return "TokenBudgetExceeded";
    case PromptError::Kind::UnsupportedVersion: return "UnsupportedVersion";
  }
  return "";
}

const PromptSection* AssembledPrompt::section(SectionId id) const {
  for (const auto& s : sections) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

std::string_view response_exemplar() { return kExemplar; }

AssembledPrompt assemble(const DataSubset& subset, std::span<const std::string> queries,
                         const PromptConfig& config, const AnalyticSpecification* previous) {
  using Kind = PromptError::Kind;
  if (queries.empty()) throw PromptError(Kind::EmptyQuery, "at least one query is required");
  for (const auto& q : queries) {
    if (blank(q)) throw PromptError(Kind::EmptyQuery, "queries must not be blank");
  }
  if (config.mode == QueryMode::FollowUp && previous == nullptr) {
    throw PromptError(Kind::MissingPreviousSpec,
                      "follow-up prompts need a previous analytic specification");
  }
  if (config.taxonomy_version != "v5") {
    throw PromptError(Kind::UnsupportedVersion,
                      "taxonomy version '" + config.taxonomy_version + "' is not a runtime version");
  }

  AssembledPrompt prompt;
  prompt.config = config;
  auto add = [&](SectionId id, std::string body) { prompt.sections.push_back({id, std::move(body)}); };

  add(SectionId::TaskTaxonomy,
      std::string(kTaskTaxonomyLeadIn) + "\n" + fenced("json", serialize_tasks(builtin_tasks())));
  add(SectionId::FollowUpTaxonomy, std::string(kFollowUpTaxonomyLeadIn) + "\n" +
                                       fenced("json", serialize_followups(builtin_followups())));
  add(SectionId::Instructions, instructions(subset, config));
  add(SectionId::ResponseSchemaExample,
      std::string(kResponseSchemaLeadIn) + "\n" + fenced("json", kExemplar));
  add(SectionId::DataSubset,
      "Here are all " + std::to_string(subset.headers.size()) + " columns and " +
          std::to_string(subset.sample_rows.size()) + " randomly sampled rows of the dataset '" +
          subset.dataset_id + "' (url: " + subset.data_url + "):\n" +
          fenced("csv", render_subset(subset)));
  if (config.mode == QueryMode::FollowUp) {
    add(SectionId::PreviousSpecification,
        "Here is the previous analytic specification:\n" +
            fenced("json", serialize_specification(*previous)));
  }
  add(SectionId::Queries, queries_body(queries));

  prompt.estimated_tokens = estimate_tokens(render(prompt));
  if (prompt.estimated_tokens > config.token_budget) {
    throw PromptError(Kind::TokenBudgetExceeded,
                      "prompt needs about " + std::to_string(prompt.estimated_tokens) +
                          " tokens, budget is " + std::to_string(config.token_budget));
  }
  return prompt;
}

AssembledPrompt assemble(const Dataset& dataset, std::span<const std::string> queries,
                         const PromptConfig& config, const AnalyticSpecification* previous) {
  return assemble(subset(dataset, config.seed), queries, config, previous);
}

std::string render(const AssembledPrompt& prompt) {
  std::string out;
  for (std::size_t i = 0; i < prompt.sections.size(); ++i) {
    if (i) out += "\n\n";
    out += "# [";
    out += to_string(prompt.sections[i].id);
    out += "]\n";
    out += prompt.sections[i].body;
  }
  out += '\n';
  return out;
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

}  // namespace vizprompt
