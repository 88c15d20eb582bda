#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vizprompt/dataset.hpp"

namespace vizprompt {

/// Low-level analytic tasks, in canonical order.
enum class TaskKind { Correlation, Distribution, DerivedValue, Trend, Filter, Sort, FindExtremum };

inline constexpr std::array<TaskKind, 7> kAllTasks = {
    TaskKind::Correlation, TaskKind::Distribution, TaskKind::DerivedValue, TaskKind::Trend,
    TaskKind::Filter,      TaskKind::Sort,         TaskKind::FindExtremum};

/// Identifier used as a taskMap key, e.g. "derived_value".
std::string_view task_id(TaskKind kind);

/// Human-readable name, e.g. "Derived Value".
std::string_view display_name(TaskKind kind);

/// Matches an id or display name after lowercasing and dropping
/// non-alphanumerics, so "Find Extremum", "find_extremum" and
/// "FindExtremum" all resolve.
std::optional<TaskKind> task_from_name(std::string_view name);

enum class Channel { XAxis, YAxis, Color, Size, Row, Column, Theta };

/// "X axis", "Y axis", "Color", ...
std::string_view channel_label(Channel channel);

/// "x", "y", "color", ...
std::string_view vega_lite_channel(Channel channel);

std::optional<Channel> channel_from_label(std::string_view label);

class TaxonomyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EncodingRule {
  Channel channel;
  std::vector<Datatype> datatypes;

  bool operator==(const EncodingRule&) const = default;
};

/// One analytic task as injected into the prompt. Every property group must
/// be non-empty; the constructor throws TaxonomyError otherwise.
class TaskDefinition {
 public:
  TaskDefinition(TaskKind kind, std::string description, std::string pro_forma_abstract,
                 std::vector<std::string> examples, std::vector<EncodingRule> encoding_rules,
                 std::string encoding_description,
                 std::vector<std::string> recommended_visualizations);

  TaskKind kind() const { return kind_; }
  std::string_view id() const { return task_id(kind_); }
  std::string_view name() const { return display_name(kind_); }
  const std::string& description() const { return description_; }
  const std::string& pro_forma_abstract() const { return pro_forma_abstract_; }
  const std::vector<std::string>& examples() const { return examples_; }
  const std::vector<EncodingRule>& encoding_rules() const { return encoding_rules_; }
  const std::string& encoding_description() const { return encoding_description_; }
  const std::vector<std::string>& recommended_visualizations() const {
    return recommended_visualizations_;
  }

  bool operator==(const TaskDefinition&) const = default;

 private:
  TaskKind kind_;
  std::string description_;
  std::string pro_forma_abstract_;
  std::vector<std::string> examples_;
  std::vector<EncodingRule> encoding_rules_;
  std::string encoding_description_;
  std::vector<std::string> recommended_visualizations_;
};

enum class FollowUpAction { Add, Remove, Replace };
enum class FollowUpTarget { Attribute, Task, VisualizationType };

std::string_view to_string(FollowUpAction action);
std::string_view to_string(FollowUpTarget target);

class FollowUpOperation {
 public:
  FollowUpOperation(FollowUpAction action, FollowUpTarget target, std::string instructions,
                    std::vector<std::string> examples);

  FollowUpAction action() const { return action_; }
  FollowUpTarget target() const { return target_; }
  const std::string& instructions() const { return instructions_; }
  const std::vector<std::string>& examples() const { return examples_; }

  bool operator==(const FollowUpOperation&) const = default;

 private:
  FollowUpAction action_;
  FollowUpTarget target_;
  std::string instructions_;
  std::vector<std::string> examples_;
};

struct Taxonomy {
  std::string version;
  std::vector<TaskDefinition> tasks;
  std::vector<FollowUpOperation> followups;
};

/// Reads the canonical taxonomy document. Task and follow-up entries go
/// through their validating constructors.
Taxonomy parse_taxonomy(std::string_view json_text);

/// The seven built-in tasks in canonical order.
const std::vector<TaskDefinition>& builtin_tasks();

/// The nine (action, target) permutations, row-major over
/// (Add, Remove, Replace) x (Attribute, Task, VisualizationType).
const std::vector<FollowUpOperation>& builtin_followups();

/// Bytes of the shipped taxonomy.v5.json.
std::string_view builtin_taxonomy_json();

/// Canonical text: fixed key order, two-space indentation, trailing newline.
/// Tasks are written in TaskKind order and follow-ups in action-major
/// order regardless of input order. Throws TaxonomyError on empty lists.
std::string serialize_taxonomy(std::span<const TaskDefinition> tasks,
                               std::span<const FollowUpOperation> followups,
                               std::string_view version = "v5");

/// JSON array of tasks in canonical order, no trailing newline.
std::string serialize_tasks(std::span<const TaskDefinition> tasks);

/// JSON array of follow-up operations in canonical order, no trailing newline.
std::string serialize_followups(std::span<const FollowUpOperation> followups);

}  // namespace vizprompt
