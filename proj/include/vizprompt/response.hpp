#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizprompt/dataset.hpp"

namespace vizprompt {

using ordered_json = nlohmann::ordered_json;

/// An attributeMap entry. Unknown keys from the model are kept in `extra`
/// and written back on serialization.
struct AttributeMapping {
  /// Phrases in the query that evoked the attribute. Serialized as a plain
  /// string when there is exactly one.
  std::vector<std::string> query_phrases;
  bool is_derived = false;
  std::optional<std::string> derivation_note;
  ordered_json extra = ordered_json::object();

  bool operator==(const AttributeMapping&) const = default;
};

struct TaskEntry {
  std::vector<std::string> attributes;
  std::optional<std::string> op;
  std::optional<ordered_json> values;
  /// "explicit" or "implicit" when the model reports it.
  std::optional<std::string> inference_type;
  ordered_json extra = ordered_json::object();

  bool operator==(const TaskEntry&) const = default;
};

/// One channel of a Vega-Lite encoding block, as far as the validator cares.
struct Encoding {
  std::optional<std::string> field;
  /// Vega-Lite "type" as written ("quantitative", ...).
  std::optional<std::string> type;
  std::optional<std::string> aggregate;
  /// `axis.title`, or the channel-level `title`.
  std::optional<std::string> axis_title;
  /// False when the channel definition was not a JSON object.
  bool well_formed = true;

  std::optional<Datatype> datatype() const;

  bool operator==(const Encoding&) const = default;
};

/// A visList entry. `vega_lite` holds the chart specification verbatim; the
/// remaining fields are views extracted from it.
struct VisSpec {
  std::string mark;
  std::map<std::string, Encoding> encodings;
  ordered_json transforms = ordered_json::array();
  std::string data_url;
  std::vector<std::string> serves_attributes;
  std::vector<std::string> serves_tasks;
  ordered_json vega_lite = ordered_json::object();
  ordered_json extra = ordered_json::object();

  /// Field names introduced by transforms (`as` of calculate, aggregate,
  /// window, bin, ...).
  std::vector<std::string> transform_outputs() const;

  bool operator==(const VisSpec&) const = default;
};

struct AnalyticSpecification {
  std::map<std::string, AttributeMapping> attribute_map;
  std::map<std::string, std::vector<TaskEntry>> task_map;
  std::vector<VisSpec> vis_list;
  /// Prose around the JSON object, present in explanation mode.
  std::optional<std::string> explanation;
  ordered_json extra = ordered_json::object();

  bool operator==(const AnalyticSpecification&) const = default;
};

class MalformedJson : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds a VisSpec from a visList entry. Accepts either the wrapped form
/// `{"attributes", "tasks", "vlSpec": {...}}` or a bare Vega-Lite object.
VisSpec vis_from_json(const ordered_json& entry);

ordered_json vis_to_json(const VisSpec& vis);

/// Builds a specification from an already parsed response object. Throws
/// MalformedJson when attributeMap, taskMap or visList is missing or has the
/// wrong JSON type.
AnalyticSpecification specification_from_json(const ordered_json& doc);

/// Parses raw model output. A bare JSON object is parsed directly; otherwise
/// the balanced `{...}` regions are tried in order and the first one that
/// carries the three response keys wins, with the surrounding prose kept as
/// `explanation`.
AnalyticSpecification parse_specification(std::string_view raw);

/// Response-JSON shape (`attributeMap`, `taskMap`, `visList`, then any
/// preserved extra keys). The explanation is not part of it.
ordered_json to_json(const AnalyticSpecification& spec);

/// `to_json(spec).dump(2)`.
std::string serialize_specification(const AnalyticSpecification& spec);

/// Byte ranges [begin, end) of top-level balanced `{...}` regions, ignoring
/// braces inside JSON strings.
std::vector<std::pair<std::size_t, std::size_t>> balanced_objects(std::string_view text);

}  // namespace vizprompt
