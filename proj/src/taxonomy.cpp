#include "vizprompt/taxonomy.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

namespace vizprompt {

namespace detail {
extern const std::string_view kTaxonomyV5Json;
}

namespace {

using ordered_json = nlohmann::ordered_json;

std::string normalize(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

constexpr std::array<Channel, 7> kAllChannels = {Channel::XAxis, Channel::YAxis, Channel::Color,
                                                 Channel::Size,  Channel::Row,   Channel::Column,
                                                 Channel::Theta};

void require(bool condition, const std::string& what) {
  if (!condition) throw TaxonomyError(what);
}

bool has_blank(const std::vector<std::string>& items) {
  return std::any_of(items.begin(), items.end(), [](const auto& s) { return s.empty(); });
}

ordered_json task_to_json(const TaskDefinition& task) {
  ordered_json rules = ordered_json::array();
  for (const auto& rule : task.encoding_rules()) {
    ordered_json types = ordered_json::array();
    for (auto t : rule.datatypes) types.push_back(std::string(to_string(t)));
    rules.push_back({{"encoding", std::string(channel_label(rule.channel))}, {"dataTypes", types}});
  }
  ordered_json j;
  j["id"] = std::string(task.id());
  j["name"] = std::string(task.name());
  j["description"] = task.description();
  j["proFormaAbstract"] = task.pro_forma_abstract();
  j["examples"] = task.examples();
  j["attributeDataTypesAndVisualEncodings"] = rules;
  j["attributesAndVisualEncodingsDescription"] = task.encoding_description();
  j["recommendedVisualizations"] = task.recommended_visualizations();
  return j;
}

ordered_json followup_to_json(const FollowUpOperation& op) {
  ordered_json j;
  j["action"] = std::string(to_string(op.action()));
  j["target"] = std::string(to_string(op.target()));
  j["instructions"] = op.instructions();
  j["examples"] = op.examples();
  return j;
}

std::vector<const TaskDefinition*> canonical_tasks(std::span<const TaskDefinition> tasks) {
  std::vector<const TaskDefinition*> out;
  for (const auto& t : tasks) out.push_back(&t);
  std::stable_sort(out.begin(), out.end(),
                   [](auto* a, auto* b) { return a->kind() < b->kind(); });
  return out;
}

std::vector<const FollowUpOperation*> canonical_followups(
    std::span<const FollowUpOperation> followups) {
  std::vector<const FollowUpOperation*> out;
  for (const auto& f : followups) out.push_back(&f);
  std::stable_sort(out.begin(), out.end(), [](auto* a, auto* b) {
    return std::pair(a->action(), a->target()) < std::pair(b->action(), b->target());
  });
  return out;
}

std::string string_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw TaxonomyError(std::string("taxonomy entry lacks string field '") + key + "'");
  }
  return j[key].get<std::string>();
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw TaxonomyError(std::string("taxonomy entry lacks list field '") + key + "'");
  }
  std::vector<std::string> out;
  for (const auto& v : j[key]) {
    if (!v.is_string()) throw TaxonomyError(std::string("non-string item in '") + key + "'");
    out.push_back(v.get<std::string>());
  }
  return out;
}

Taxonomy load_builtin() {
  Taxonomy tax = parse_taxonomy(detail::kTaxonomyV5Json);
  require(tax.tasks.size() == kAllTasks.size(), "built-in taxonomy must define exactly 7 tasks");
  for (std::size_t i = 0; i < kAllTasks.size(); ++i) {
    require(tax.tasks[i].kind() == kAllTasks[i], "built-in tasks out of canonical order");
  }
  require(tax.followups.size() == 9, "built-in taxonomy must define exactly 9 follow-ups");
  std::set<std::pair<FollowUpAction, FollowUpTarget>> seen;
  for (const auto& f : tax.followups) {
    require(seen.insert({f.action(), f.target()}).second, "duplicate follow-up permutation");
  }
  return tax;
}

const Taxonomy& builtin() {
  static const Taxonomy tax = load_builtin();
  return tax;
}

}  // namespace

std::string_view task_id(TaskKind kind) {
  switch (kind) {
    case TaskKind::Correlation: return "correlation";
    case TaskKind::Distribution: return "distribution";
    case TaskKind::DerivedValue: return "derived_value";
    case TaskKind::Trend: return "trend";
    case TaskKind::Filter: return "filter";
    case TaskKind::Sort: return "sort";
    case TaskKind::FindExtremum: return "find_extremum";
  }
  return "";
}

std::string_view display_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::Correlation: return "Correlation";
    case TaskKind::Distribution: return "Distribution";
    case TaskKind::DerivedValue: return "Derived Value";
    case TaskKind::Trend: return "Trend";
    case TaskKind::Filter: return "Filter";
    case TaskKind::Sort: return "Sort";
    case TaskKind::FindExtremum: return "Find Extremum";
  }
  return "";
}

std::optional<TaskKind> task_from_name(std::string_view name) {
  const std::string key = normalize(name);
  for (auto kind : kAllTasks) {
    if (normalize(task_id(kind)) == key) return kind;
  }
  return std::nullopt;
}

std::string_view channel_label(Channel channel) {
  switch (channel) {
    case Channel::XAxis: return "X axis";
    case Channel::YAxis: return "Y axis";
    case Channel::Color: return "Color";
    case Channel::Size: return "Size";
    case Channel::Row: return "Row";
    case Channel::Column: return "Column";
    case Channel::Theta: return "Theta";
  }
  return "";
}

std::string_view vega_lite_channel(Channel channel) {
  switch (channel) {
    case Channel::XAxis: return "x";
    case Channel::YAxis: return "y";
    case Channel::Color: return "color";
    case Channel::Size: return "size";
    case Channel::Row: return "row";
    case Channel::Column: return "column";
    case Channel::Theta: return "theta";
  }
  return "";
}

std::optional<Channel> channel_from_label(std::string_view label) {
  for (auto c : kAllChannels) {
    if (channel_label(c) == label) return c;
  }
  return std::nullopt;
}

std::string_view to_string(FollowUpAction action) {
  switch (action) {
    case FollowUpAction::Add: return "Add";
    case FollowUpAction::Remove: return "Remove";
    case FollowUpAction::Replace: return "Replace";
  }
  return "";
}

std::string_view to_string(FollowUpTarget target) {
  switch (target) {
    case FollowUpTarget::Attribute: return "Attribute";
    case FollowUpTarget::Task: return "Task";
    case FollowUpTarget::VisualizationType: return "VisualizationType";
  }
  return "";
}

TaskDefinition::TaskDefinition(TaskKind kind, std::string description,
                               std::string pro_forma_abstract, std::vector<std::string> examples,
                               std::vector<EncodingRule> encoding_rules,
                               std::string encoding_description,
                               std::vector<std::string> recommended_visualizations)
    : kind_(kind),
      description_(std::move(description)),
      pro_forma_abstract_(std::move(pro_forma_abstract)),
      examples_(std::move(examples)),
      encoding_rules_(std::move(encoding_rules)),
      encoding_description_(std::move(encoding_description)),
      recommended_visualizations_(std::move(recommended_visualizations)) {
  const std::string who = "task " + std::string(task_id(kind_));
  require(!description_.empty(), who + ": empty description");
  require(!pro_forma_abstract_.empty(), who + ": empty pro forma abstract");
  require(!examples_.empty() && !has_blank(examples_), who + ": examples must be non-empty");
  require(!encoding_rules_.empty(), who + ": encoding rules must be non-empty");
  for (const auto& rule : encoding_rules_) {
    require(!rule.datatypes.empty(), who + ": encoding rule without datatypes");
  }
  require(!encoding_description_.empty(), who + ": empty encoding description");
  require(!recommended_visualizations_.empty() && !has_blank(recommended_visualizations_),
          who + ": recommended visualizations must be non-empty");
}

FollowUpOperation::FollowUpOperation(FollowUpAction action, FollowUpTarget target,
                                     std::string instructions, std::vector<std::string> examples)
    : action_(action),
      target_(target),
      instructions_(std::move(instructions)),
      examples_(std::move(examples)) {
  const std::string who =
      "follow-up " + std::string(to_string(action_)) + "+" + std::string(to_string(target_));
  require(!instructions_.empty(), who + ": empty instructions");
  require(!examples_.empty() && !has_blank(examples_), who + ": examples must be non-empty");
}

Taxonomy parse_taxonomy(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw TaxonomyError(std::string("taxonomy is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw TaxonomyError("taxonomy document must be an object");

  Taxonomy tax;
  tax.version = doc.value("version", "");
  if (!doc.contains("analyticTasks") || !doc["analyticTasks"].is_array()) {
    throw TaxonomyError("taxonomy lacks analyticTasks");
  }
  for (const auto& t : doc["analyticTasks"]) {
    const std::string id = string_field(t, "id");
    const auto kind = task_from_name(id);
    require(kind.has_value() && task_id(*kind) == id, "unknown task id '" + id + "'");
    require(string_field(t, "name") == display_name(*kind), "task '" + id + "' has wrong name");

    std::vector<EncodingRule> rules;
    if (!t.contains("attributeDataTypesAndVisualEncodings") ||
        !t["attributeDataTypesAndVisualEncodings"].is_array()) {
      throw TaxonomyError("task '" + id + "' lacks attributeDataTypesAndVisualEncodings");
    }
    for (const auto& r : t["attributeDataTypesAndVisualEncodings"]) {
      const auto channel = channel_from_label(string_field(r, "encoding"));
      require(channel.has_value(), "task '" + id + "' uses an unknown encoding channel");
      EncodingRule rule{*channel, {}};
      for (const auto& name : string_list(r, "dataTypes")) {
        const auto dt = parse_datatype(name);
        require(dt.has_value(), "task '" + id + "' uses unknown datatype '" + name + "'");
        rule.datatypes.push_back(*dt);
      }
      rules.push_back(std::move(rule));
    }
    tax.tasks.emplace_back(*kind, string_field(t, "description"),
                           string_field(t, "proFormaAbstract"), string_list(t, "examples"),
                           std::move(rules),
                           string_field(t, "attributesAndVisualEncodingsDescription"),
                           string_list(t, "recommendedVisualizations"));
  }

  if (doc.contains("followUpOperations")) {
    for (const auto& f : doc["followUpOperations"]) {
      const std::string action = string_field(f, "action");
      const std::string target = string_field(f, "target");
      std::optional<FollowUpAction> a;
      std::optional<FollowUpTarget> tg;
      for (auto x : {FollowUpAction::Add, FollowUpAction::Remove, FollowUpAction::Replace}) {
        if (to_string(x) == action) a = x;
      }
      for (auto x : {FollowUpTarget::Attribute, FollowUpTarget::Task,
                     FollowUpTarget::VisualizationType}) {
        if (to_string(x) == target) tg = x;
      }
      require(a && tg, "unknown follow-up permutation " + action + "+" + target);
      tax.followups.emplace_back(*a, *tg, string_field(f, "instructions"),
                                 string_list(f, "examples"));
    }
  }
  return tax;
}

const std::vector<TaskDefinition>& builtin_tasks() { return builtin().tasks; }

const std::vector<FollowUpOperation>& builtin_followups() { return builtin().followups; }

std::string_view builtin_taxonomy_json() { return detail::kTaxonomyV5Json; }

std::string serialize_tasks(std::span<const TaskDefinition> tasks) {
  ordered_json arr = ordered_json::array();
  for (const auto* t : canonical_tasks(tasks)) arr.push_back(task_to_json(*t));
  return arr.dump(2);
}

std::string serialize_followups(std::span<const FollowUpOperation> followups) {
  ordered_json arr = ordered_json::array();
  for (const auto* f : canonical_followups(followups)) arr.push_back(followup_to_json(*f));
  return arr.dump(2);
}

std::string serialize_taxonomy(std::span<const TaskDefinition> tasks,
                               std::span<const FollowUpOperation> followups,
                               std::string_view version) {
  require(!tasks.empty(), "cannot serialize an empty task list");
  require(!followups.empty(), "cannot serialize an empty follow-up list");
  ordered_json doc;
  doc["version"] = std::string(version);
  doc["analyticTasks"] = ordered_json::array();
  for (const auto* t : canonical_tasks(tasks)) doc["analyticTasks"].push_back(task_to_json(*t));
  doc["followUpOperations"] = ordered_json::array();
  for (const auto* f : canonical_followups(followups)) {
    doc["followUpOperations"].push_back(followup_to_json(*f));
  }
  return doc.dump(2) + "\n";
}

}  // namespace vizprompt
