#include "vizprompt/response.hpp"

#include <algorithm>

namespace vizprompt {

namespace {

std::string trim_copy(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> string_or_list(const ordered_json& j, bool drop_empty) {
  std::vector<std::string> out;
  auto push = [&](const ordered_json& v) {
    if (!v.is_string()) throw MalformedJson("expected a string or a list of strings");
    auto s = v.get<std::string>();
    if (drop_empty && s.empty()) return;
    out.push_back(std::move(s));
  };
  if (j.is_array()) {
    for (const auto& v : j) push(v);
  } else if (!j.is_null()) {
    push(j);
  }
  return out;
}

std::optional<std::string> optional_string(const ordered_json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw MalformedJson(std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

AttributeMapping attribute_from_json(const ordered_json& j) {
  AttributeMapping m;
  if (j.is_string()) {
    m.query_phrases = string_or_list(j, true);
    return m;
  }
  if (!j.is_object()) throw MalformedJson("attributeMap values must be objects");
  for (const auto& [key, value] : j.items()) {
    if (key == "queryPhrase") {
      m.query_phrases = string_or_list(value, true);
    } else if (key == "isDerived") {
      if (!value.is_boolean()) throw MalformedJson("'isDerived' must be a boolean");
      m.is_derived = value.get<bool>();
    } else if (key == "derivationNote") {
      m.derivation_note = optional_string(j, "derivationNote");
    } else {
      m.extra[key] = value;
    }
  }
  return m;
}

ordered_json attribute_to_json(const AttributeMapping& m) {
  ordered_json j = ordered_json::object();
  if (m.query_phrases.size() == 1) {
    j["queryPhrase"] = m.query_phrases.front();
  } else {
    j["queryPhrase"] = m.query_phrases;
  }
  j["isDerived"] = m.is_derived;
  if (m.derivation_note) j["derivationNote"] = *m.derivation_note;
  for (const auto& [key, value] : m.extra.items()) j[key] = value;
  return j;
}

TaskEntry task_entry_from_json(const ordered_json& j) {
  if (!j.is_object()) throw MalformedJson("taskMap entries must be objects");
  TaskEntry t;
  for (const auto& [key, value] : j.items()) {
    if (key == "attributes") {
      t.attributes = string_or_list(value, false);
    } else if (key == "operator") {
      t.op = optional_string(j, "operator");
    } else if (key == "values") {
      if (!value.is_null()) t.values = value;
    } else if (key == "inferenceType") {
      t.inference_type = optional_string(j, "inferenceType");
    } else {
      t.extra[key] = value;
    }
  }
  return t;
}

ordered_json task_entry_to_json(const TaskEntry& t) {
  ordered_json j = ordered_json::object();
  j["attributes"] = t.attributes;
  if (t.op) j["operator"] = *t.op;
  if (t.values) j["values"] = *t.values;
  if (t.inference_type) j["inferenceType"] = *t.inference_type;
  for (const auto& [key, value] : t.extra.items()) j[key] = value;
  return j;
}

Encoding encoding_from_json(const ordered_json& j) {
  Encoding e;
  if (!j.is_object()) {
    e.well_formed = false;
    return e;
  }
  auto str = [&](const char* key, std::optional<std::string>& out) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    if (it->is_string()) {
      out = it->get<std::string>();
    } else {
      e.well_formed = false;
    }
  };
  str("field", e.field);
  str("type", e.type);
  str("aggregate", e.aggregate);
  if (auto axis = j.find("axis"); axis != j.end() && axis->is_object()) {
    if (auto t = axis->find("title"); t != axis->end() && t->is_string()) {
      e.axis_title = t->get<std::string>();
    }
  }
  if (!e.axis_title) {
    if (auto t = j.find("title"); t != j.end() && t->is_string()) e.axis_title = t->get<std::string>();
  }
  return e;
}

void collect_as(const ordered_json& j, std::vector<std::string>& out) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      if (key == "as") {
        if (value.is_string()) out.push_back(value.get<std::string>());
        if (value.is_array()) {
          for (const auto& v : value) {
            if (v.is_string()) out.push_back(v.get<std::string>());
          }
        }
      } else {
        collect_as(value, out);
      }
    }
  } else if (j.is_array()) {
    for (const auto& v : j) collect_as(v, out);
  }
}

bool has_response_keys(const ordered_json& j) {
  return j.is_object() && j.contains("attributeMap") && j.contains("taskMap") &&
         j.contains("visList");
}

std::string strip_fence_tail(std::string s) {
  s = trim_copy(s);
  for (std::string_view fence : {"```json", "```JSON", "```"}) {
    if (s.ends_with(fence)) {
      s.resize(s.size() - fence.size());
      break;
    }
  }
  return trim_copy(s);
}

std::string strip_fence_head(std::string s) {
  s = trim_copy(s);
  if (s.starts_with("```")) s.erase(0, 3);
  return trim_copy(s);
}

std::optional<ordered_json> try_parse_object(std::string_view text) {
  auto j = ordered_json::parse(text, nullptr, false);
  if (j.is_discarded() || !has_response_keys(j)) return std::nullopt;
  return j;
}

/// End of the balanced object starting at `start` (which must be '{'), or
/// npos when it never closes.
std::size_t object_end(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

std::optional<Datatype> Encoding::datatype() const {
  if (!type) return std::nullopt;
  return parse_datatype(*type);
}

std::vector<std::string> VisSpec::transform_outputs() const {
  std::vector<std::string> out;
  collect_as(transforms, out);
  return out;
}

VisSpec vis_from_json(const ordered_json& entry) {
  if (!entry.is_object()) throw MalformedJson("visList entries must be objects");
  VisSpec v;
  const bool wrapped = entry.contains("vlSpec");
  for (const auto& [key, value] : entry.items()) {
    if (key == "attributes") {
      v.serves_attributes = string_or_list(value, false);
    } else if (key == "tasks") {
      v.serves_tasks = string_or_list(value, false);
    } else if (wrapped && key == "vlSpec") {
      v.vega_lite = value;
    } else if (wrapped) {
      v.extra[key] = value;
    } else {
      v.vega_lite[key] = value;
    }
  }
  if (!v.vega_lite.is_object()) return v;  // validator reports it

  if (auto m = v.vega_lite.find("mark"); m != v.vega_lite.end()) {
    if (m->is_string()) {
      v.mark = m->get<std::string>();
    } else if (m->is_object() && m->contains("type") && (*m)["type"].is_string()) {
      v.mark = (*m)["type"].get<std::string>();
    }
  }
  if (auto enc = v.vega_lite.find("encoding"); enc != v.vega_lite.end() && enc->is_object()) {
    for (const auto& [channel, def] : enc->items()) v.encodings[channel] = encoding_from_json(def);
  }
  if (auto t = v.vega_lite.find("transform"); t != v.vega_lite.end()) v.transforms = *t;
  if (auto d = v.vega_lite.find("data"); d != v.vega_lite.end() && d->is_object()) {
    if (auto url = d->find("url"); url != d->end() && url->is_string()) {
      v.data_url = url->get<std::string>();
    }
  }
  return v;
}

ordered_json vis_to_json(const VisSpec& vis) {
  ordered_json j = ordered_json::object();
  j["attributes"] = vis.serves_attributes;
  j["tasks"] = vis.serves_tasks;
  j["vlSpec"] = vis.vega_lite;
  for (const auto& [key, value] : vis.extra.items()) j[key] = value;
  return j;
}

AnalyticSpecification specification_from_json(const ordered_json& doc) {
  if (!has_response_keys(doc)) {
    throw MalformedJson("response object must contain attributeMap, taskMap and visList");
  }
  const auto& attrs = doc["attributeMap"];
  const auto& tasks = doc["taskMap"];
  const auto& vis = doc["visList"];
  if (!attrs.is_object()) throw MalformedJson("attributeMap must be an object");
  if (!tasks.is_object()) throw MalformedJson("taskMap must be an object");
  if (!vis.is_array()) throw MalformedJson("visList must be an array");

  AnalyticSpecification spec;
  for (const auto& [name, value] : attrs.items()) {
    spec.attribute_map[name] = attribute_from_json(value);
  }
  for (const auto& [name, value] : tasks.items()) {
    auto& entries = spec.task_map[name];
    if (value.is_array()) {
      for (const auto& e : value) entries.push_back(task_entry_from_json(e));
    } else {
      entries.push_back(task_entry_from_json(value));
    }
  }
  for (const auto& entry : vis) spec.vis_list.push_back(vis_from_json(entry));
  for (const auto& [key, value] : doc.items()) {
    if (key != "attributeMap" && key != "taskMap" && key != "visList") spec.extra[key] = value;
  }
  return spec;
}

std::vector<std::pair<std::size_t, std::size_t>> balanced_objects(std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string_view::npos) {
    const std::size_t end = object_end(text, pos);
    if (end == std::string_view::npos) break;
    out.emplace_back(pos, end);
    pos = end;
  }
  return out;
}

AnalyticSpecification parse_specification(std::string_view raw) {
  const std::string trimmed = trim_copy(raw);
  if (trimmed.starts_with("{")) {
    if (auto doc = ordered_json::parse(trimmed, nullptr, false); !doc.is_discarded()) {
      if (!doc.is_object()) throw MalformedJson("response is not a JSON object");
      return specification_from_json(doc);
    }
  }

  auto accept = [&](std::size_t begin, std::size_t end) -> std::optional<AnalyticSpecification> {
    auto doc = try_parse_object(raw.substr(begin, end - begin));
    if (!doc) return std::nullopt;
    AnalyticSpecification spec = specification_from_json(*doc);
    const std::string before = strip_fence_tail(std::string(raw.substr(0, begin)));
    const std::string after = strip_fence_head(std::string(raw.substr(end)));
    std::string prose = before;
    if (!before.empty() && !after.empty()) prose += "\n\n";
    prose += after;
    if (!prose.empty()) spec.explanation = std::move(prose);
    return spec;
  };

  for (const auto& [begin, end] : balanced_objects(raw)) {
    if (auto spec = accept(begin, end)) return *spec;
  }
  // A stray '{' in the prose can swallow the real object; retry from every
  // opening brace.
  for (std::size_t pos = raw.find('{'); pos != std::string_view::npos; pos = raw.find('{', pos + 1)) {
    const std::size_t end = object_end(raw, pos);
    if (end == std::string_view::npos) continue;
    if (auto spec = accept(pos, end)) return *spec;
  }
  throw MalformedJson("no balanced JSON object with attributeMap, taskMap and visList found");
}

ordered_json to_json(const AnalyticSpecification& spec) {
  ordered_json j = ordered_json::object();
  ordered_json attrs = ordered_json::object();
  for (const auto& [name, m] : spec.attribute_map) attrs[name] = attribute_to_json(m);
  ordered_json tasks = ordered_json::object();
  for (const auto& [name, entries] : spec.task_map) {
    ordered_json arr = ordered_json::array();
    for (const auto& e : entries) arr.push_back(task_entry_to_json(e));
    tasks[name] = arr;
  }
  ordered_json vis = ordered_json::array();
  for (const auto& v : spec.vis_list) vis.push_back(vis_to_json(v));
  j["attributeMap"] = attrs;
  j["taskMap"] = tasks;
  j["visList"] = vis;
  for (const auto& [key, value] : spec.extra.items()) j[key] = value;
  return j;
}

std::string serialize_specification(const AnalyticSpecification& spec) {
  return to_json(spec).dump(2);
}

}  // namespace vizprompt
