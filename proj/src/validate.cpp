#include "vizprompt/validate.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "vizprompt/taxonomy.hpp"
#include "vizprompt/vega_lite.hpp"

namespace vizprompt {

namespace {

constexpr std::array<FindingCode, 9> kAllCodes = {
    FindingCode::MalformedJson,      FindingCode::UnknownAttribute, FindingCode::UngroundedPhrase,
    FindingCode::UnknownTask,        FindingCode::InvalidVegaLite,  FindingCode::FieldTitleMismatch,
    FindingCode::EmptyVisList,       FindingCode::TaskAttributeOrphan,
    FindingCode::AmbiguityUncovered,
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string in_quotes(std::string_view s) { return "'" + std::string(s) + "'"; }

/// Title words that describe aggregation rather than the attribute.
bool aggregate_word(std::string_view w) {
  static constexpr std::array<std::string_view, 18> kWords = {
      "total", "sum", "of", "the", "average", "avg", "mean", "median", "count", "number",
      "min", "minimum", "max", "maximum", "by", "per", "in", "across"};
  return std::find(kWords.begin(), kWords.end(), w) != kWords.end();
}

/// Normalized attribute name a title refers to, aggregation words removed.
std::string title_key(std::string_view title) {
  std::string key;
  std::string word;
  const auto flush = [&] {
    if (!word.empty() && !aggregate_word(word)) key += word;
    word.clear();
  };
  for (unsigned char c : title) {
    if (std::isalnum(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return key;
}

std::string vis_label(std::size_t index) { return "visList[" + std::to_string(index) + "]"; }

/// Whether the note mentions any dataset attribute, case-insensitively.
bool names_existing_attribute(std::string_view note, const Dataset& dataset) {
  const std::string n = lower(note);
  return std::any_of(dataset.attributes().begin(), dataset.attributes().end(),
                     [&](const Attribute& a) { return n.find(lower(a.name)) != std::string::npos; });
}

}  // namespace

std::string_view to_string(Severity severity) {
  return severity == Severity::Error ? "Error" : "Warning";
}

std::string_view to_string(FindingCode code) {
  switch (code) {
    case FindingCode::MalformedJson: return "MalformedJson";
    case FindingCode::UnknownAttribute: return "UnknownAttribute";
    case FindingCode::UngroundedPhrase: return "UngroundedPhrase";
    case FindingCode::UnknownTask: return "UnknownTask";
    case FindingCode::InvalidVegaLite: return "InvalidVegaLite";
    case FindingCode::FieldTitleMismatch: return "FieldTitleMismatch";
    case FindingCode::EmptyVisList: return "EmptyVisList";
    case FindingCode::TaskAttributeOrphan: return "TaskAttributeOrphan";
    case FindingCode::AmbiguityUncovered: return "AmbiguityUncovered";
  }
  return "";
}

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Valid: return "Valid";
    case Verdict::ValidWithWarnings: return "ValidWithWarnings";
    case Verdict::Invalid: return "Invalid";
  }
  return "";
}

std::optional<Severity> parse_severity(std::string_view text) {
  if (text == "Error") return Severity::Error;
  if (text == "Warning") return Severity::Warning;
  return std::nullopt;
}

std::optional<FindingCode> parse_finding_code(std::string_view text) {
  for (auto code : kAllCodes) {
    if (to_string(code) == text) return code;
  }
  return std::nullopt;
}

Verdict verdict_for(const std::vector<Finding>& findings) {
  bool warnings = false;
  for (const auto& f : findings) {
    if (f.severity == Severity::Error) return Verdict::Invalid;
    warnings = true;
  }
  return warnings ? Verdict::ValidWithWarnings : Verdict::Valid;
}

void ValidationReport::add(Severity severity, FindingCode code, std::string detail) {
  findings_.push_back({severity, code, std::move(detail)});
}

void ValidationReport::merge(const ValidationReport& other) {
  findings_.insert(findings_.end(), other.findings_.begin(), other.findings_.end());
}

std::vector<FindingCode> ValidationReport::codes() const {
  std::vector<FindingCode> out;
  for (const auto& f : findings_) out.push_back(f.code);
  return out;
}

std::size_t ValidationReport::count(FindingCode code) const {
  return static_cast<std::size_t>(std::count_if(
      findings_.begin(), findings_.end(), [code](const Finding& f) { return f.code == code; }));
}

nlohmann::ordered_json to_json(const ValidationReport& report) {
  nlohmann::ordered_json j;
  j["verdict"] = std::string(to_string(report.verdict()));
  j["findings"] = nlohmann::ordered_json::array();
  for (const auto& f : report.findings()) {
    j["findings"].push_back({{"severity", std::string(to_string(f.severity))},
                             {"code", std::string(to_string(f.code))},
                             {"detail", f.detail}});
  }
  return j;
}

ValidationReport report_from_json(const nlohmann::json& j) {
  ValidationReport report;
  if (!j.is_object() || !j.contains("findings")) return report;
  for (const auto& f : j.at("findings")) {
    const auto severity = parse_severity(f.at("severity").get<std::string>());
    const auto code = parse_finding_code(f.at("code").get<std::string>());
    if (!severity || !code) throw std::runtime_error("unknown finding in validation report");
    report.add(*severity, *code, f.value("detail", ""));
  }
  return report;
}

std::string normalize_label(std::string_view text) {
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

ValidationReport validate(const AnalyticSpecification& spec, const Dataset& dataset,
                          std::string_view query) {
  ValidationReport report;
  const std::string query_lc = lower(query);

  // 1. attributes exist
  for (const auto& [name, m] : spec.attribute_map) {
    if (m.is_derived) {
      if (!m.derivation_note || !names_existing_attribute(*m.derivation_note, dataset)) {
        report.add(Severity::Error, FindingCode::UnknownAttribute,
                   "derived attribute " + in_quotes(name) +
                       " needs a derivationNote naming existing source attributes");
      }
    } else if (!dataset.has_attribute(name)) {
      report.add(Severity::Error, FindingCode::UnknownAttribute,
                 "attribute " + in_quotes(name) + " is not in dataset " + in_quotes(dataset.id()));
    }
  }

  // 2. phrases grounded in the query
  for (const auto& [name, m] : spec.attribute_map) {
    for (const auto& phrase : m.query_phrases) {
      if (query_lc.find(lower(phrase)) == std::string::npos) {
        report.add(Severity::Warning, FindingCode::UngroundedPhrase,
                   "query phrase " + in_quotes(phrase) + " for " + in_quotes(name) +
                       " does not occur in the query");
      }
    }
  }

  // 3. tasks known
  for (const auto& [task, entries] : spec.task_map) {
    if (!task_from_name(task)) {
      report.add(Severity::Error, FindingCode::UnknownTask, "unknown analytic task " + in_quotes(task));
    }
  }

  // 4. task attributes declared
  for (const auto& [task, entries] : spec.task_map) {
    for (const auto& entry : entries) {
      for (const auto& attr : entry.attributes) {
        if (!spec.attribute_map.contains(attr)) {
          report.add(Severity::Error, FindingCode::TaskAttributeOrphan,
                     "task " + in_quotes(task) + " references " + in_quotes(attr) +
                         ", which is not in the attributeMap");
        }
      }
    }
  }

  // 5. structural Vega-Lite subset
  std::set<std::string, std::less<>> derived;
  for (const auto& [name, m] : spec.attribute_map) {
    if (m.is_derived) derived.insert(name);
  }
  for (std::size_t i = 0; i < spec.vis_list.size(); ++i) {
    const VisSpec& vis = spec.vis_list[i];
    const std::string where = vis_label(i);
    if (!vis.vega_lite.is_object()) {
      report.add(Severity::Error, FindingCode::InvalidVegaLite, where + ": vlSpec is not an object");
      continue;
    }
    if (!vega_lite::is_mark(vis.mark)) {
      report.add(Severity::Error, FindingCode::InvalidVegaLite,
                 where + ": unsupported mark " + in_quotes(vis.mark));
    }
    if (auto enc = vis.vega_lite.find("encoding");
        enc != vis.vega_lite.end() && !enc->is_object()) {
      report.add(Severity::Error, FindingCode::InvalidVegaLite,
                 where + ": encoding is not an object");
    }
    if (!vis.transforms.is_array()) {
      report.add(Severity::Error, FindingCode::InvalidVegaLite,
                 where + ": transform is not an array");
    }
    const auto produced = vis.transform_outputs();
    for (const auto& [channel, e] : vis.encodings) {
      const std::string at = where + "." + channel;
      if (!vega_lite::is_channel(channel)) {
        report.add(Severity::Error, FindingCode::InvalidVegaLite,
                   at + ": unsupported channel " + in_quotes(channel));
      }
      if (!e.well_formed) {
        report.add(Severity::Error, FindingCode::InvalidVegaLite, at + ": malformed channel definition");
        continue;
      }
      if (e.type && !e.datatype()) {
        report.add(Severity::Error, FindingCode::InvalidVegaLite,
                   at + ": unknown encoding type " + in_quotes(*e.type));
      }
      if (e.field) {
        const bool resolves =
            dataset.has_attribute(*e.field) || derived.contains(*e.field) ||
            std::find(produced.begin(), produced.end(), *e.field) != produced.end();
        if (!resolves) {
          report.add(Severity::Error, FindingCode::InvalidVegaLite,
                     at + ": field " + in_quotes(*e.field) + " does not resolve to a dataset attribute");
        }
      }
    }
  }

  // 6. axis titles that name a different attribute than the encoded field
  std::vector<std::string> known = dataset.attribute_names();
  known.insert(known.end(), derived.begin(), derived.end());
  for (std::size_t i = 0; i < spec.vis_list.size(); ++i) {
    for (const auto& [channel, e] : spec.vis_list[i].encodings) {
      if (!e.field || !e.axis_title) continue;
      const std::string title = title_key(*e.axis_title);
      const std::string field = normalize_label(*e.field);
      if (title.empty() || title == field || normalize_label(*e.axis_title) == field) continue;
      for (const auto& other : known) {
        if (normalize_label(other) == title) {
          report.add(Severity::Warning, FindingCode::FieldTitleMismatch,
                     vis_label(i) + "." + channel + ": title " + in_quotes(*e.axis_title) +
                         " names " + in_quotes(other) + " but the field is " + in_quotes(*e.field));
          break;
        }
      }
    }
  }

  // 7. at least one chart
  if (spec.vis_list.empty()) {
    report.add(Severity::Error, FindingCode::EmptyVisList, "visList is empty");
  }
  return report;
}

ValidationReport validate_ambiguity_coverage(const AnalyticSpecification& spec,
                                             const AmbiguityCandidates& candidates) {
  ValidationReport report;
  for (const auto& [phrase, attrs] : candidates) {
    for (const auto& attr : attrs) {
      const bool covered = std::any_of(spec.vis_list.begin(), spec.vis_list.end(), [&](const VisSpec& v) {
        return std::any_of(v.encodings.begin(), v.encodings.end(),
                           [&](const auto& kv) { return kv.second.field == attr; });
      });
      if (!covered) {
        report.add(Severity::Warning, FindingCode::AmbiguityUncovered,
                   "ambiguous phrase " + in_quotes(phrase) + ": no chart encodes " + in_quotes(attr));
      }
    }
  }
  return report;
}

Analysis analyze(std::string_view raw, const Dataset& dataset, std::string_view query) {
  Analysis out;
  try {
    out.specification = parse_specification(raw);
  } catch (const MalformedJson& e) {
    out.report.add(Severity::Error, FindingCode::MalformedJson, e.what());
    return out;
  }
  out.report = validate(*out.specification, dataset, query);
  return out;
}

}  // namespace vizprompt
