#include "vizprompt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vizprompt/csv.hpp"

namespace vizprompt {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool valid_month_day(int month, int day) {
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> distinct_values(const std::vector<Row>& rows, std::size_t column) {
  std::vector<std::string> out;
  std::set<std::string_view> seen;
  for (const auto& row : rows) {
    const std::string& v = row[column];
    if (v.empty() || seen.contains(v)) continue;
    seen.insert(v);
    out.push_back(v);
    if (out.size() == 5) break;
  }
  return out;
}

Dataset build(std::string id, std::string source, std::vector<std::string> headers,
              std::vector<Row> rows, const DatatypeOverrides& overrides) {
  if (headers.empty()) throw DataError(source + ": no columns");
  std::set<std::string_view> names;
  for (const auto& h : headers) {
    if (h.empty()) throw DataError(source + ": empty column name");
    if (!names.insert(h).second) throw DataError(source + ": duplicate column name '" + h + "'");
  }
  for (const auto& [name, type] : overrides) {
    if (!names.contains(name)) {
      throw DataError(source + ": datatype override names unknown attribute '" + name + "'");
    }
  }

  std::vector<Attribute> attributes;
  attributes.reserve(headers.size());
  std::vector<std::string> column;
  for (std::size_t c = 0; c < headers.size(); ++c) {
    column.clear();
    for (const auto& row : rows) column.push_back(row[c]);
    Attribute attr;
    attr.name = headers[c];
    auto forced = overrides.find(attr.name);
    attr.datatype = forced != overrides.end() ? forced->second : infer_datatype(column);
    attr.distinct_sample = distinct_values(rows, c);
    attributes.push_back(std::move(attr));
  }
  return Dataset(std::move(id), std::move(source), std::move(attributes), std::move(rows));
}

std::string stringify(const nlohmann::json& value) {
  if (value.is_null()) return {};
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

}  // namespace

std::string_view to_string(Datatype type) {
  switch (type) {
    case Datatype::Quantitative: return "Quantitative";
    case Datatype::Nominal: return "Nominal";
    case Datatype::Ordinal: return "Ordinal";
    case Datatype::Temporal: return "Temporal";
  }
  return "Nominal";
}

std::optional<Datatype> parse_datatype(std::string_view text) {
  const std::string t = lower(trim(text));
  if (t == "quantitative") return Datatype::Quantitative;
  if (t == "nominal") return Datatype::Nominal;
  if (t == "ordinal") return Datatype::Ordinal;
  if (t == "temporal") return Datatype::Temporal;
  return std::nullopt;
}

Dataset::Dataset(std::string id, std::string source, std::vector<Attribute> attributes,
                 std::vector<Row> rows)
    : id_(std::move(id)),
      source_(std::move(source)),
      attributes_(std::move(attributes)),
      rows_(std::move(rows)) {
  std::set<std::string_view> names;
  for (const auto& a : attributes_) {
    if (a.name.empty()) throw DataError("attribute name must be non-empty");
    if (!names.insert(a.name).second) throw DataError("duplicate attribute '" + a.name + "'");
  }
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].size() != attributes_.size()) {
      throw DataError("row " + std::to_string(i) + " has " + std::to_string(rows_[i].size()) +
                      " values for " + std::to_string(attributes_.size()) + " attributes");
    }
  }
}

std::vector<std::string> Dataset::attribute_names() const {
  std::vector<std::string> out;
  out.reserve(attributes_.size());
  for (const auto& a : attributes_) out.push_back(a.name);
  return out;
}

const Attribute* Dataset::find(std::string_view name) const {
  for (const auto& a : attributes_) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

DatatypeOverrides parse_overrides(std::string_view text) {
  DatatypeOverrides out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view l = trim(line);
    if (l.empty() || l.front() == '#') continue;
    const auto eq = l.rfind('=');
    if (eq == std::string_view::npos) {
      throw DataError("datatype override line " + std::to_string(lineno) + ": expected name = Datatype");
    }
    const std::string name(trim(l.substr(0, eq)));
    const auto type = parse_datatype(l.substr(eq + 1));
    if (name.empty() || !type) {
      throw DataError("datatype override line " + std::to_string(lineno) + ": bad entry");
    }
    out[name] = *type;
  }
  return out;
}

std::filesystem::path overrides_path_for(const std::filesystem::path& data_file) {
  auto p = data_file;
  p.replace_extension(".types");
  return p;
}

bool parses_as_number(std::string_view value) {
  std::string_view v = trim(value);
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  if (v.empty()) return false;
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  return ec == std::errc() && ptr == v.data() + v.size() && std::isfinite(out);
}

bool parses_as_date(std::string_view value) {
  static const std::regex iso(
      R"((\d{4})-(\d{2})-(\d{2})([T ](\d{2}):(\d{2})(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:?\d{2})?)?)");
  static const std::regex us(R"((\d{1,2})/(\d{1,2})/(\d{4}))");
  static const std::regex year(R"(\d{4})");

  const std::string v(trim(value));
  std::smatch m;
  if (std::regex_match(v, m, iso)) {
    return valid_month_day(std::stoi(m[2]), std::stoi(m[3]));
  }
  if (std::regex_match(v, m, us)) {
    return valid_month_day(std::stoi(m[1]), std::stoi(m[2]));
  }
  if (std::regex_match(v, year)) {
    const int y = std::stoi(v);
    return y >= 1700 && y <= 2199;
  }
  return false;
}

Datatype infer_datatype(std::span<const std::string> values) {
  std::size_t votes = 0;
  std::size_t dates = 0;
  std::size_t numbers = 0;
  for (const auto& v : values) {
    if (trim(v).empty()) continue;
    ++votes;
    if (parses_as_date(v)) ++dates;
    if (parses_as_number(v)) ++numbers;
  }
  if (votes == 0) return Datatype::Nominal;
  const double total = static_cast<double>(votes);
  if (static_cast<double>(dates) / total >= kInferenceThreshold) return Datatype::Temporal;
  if (static_cast<double>(numbers) / total >= kInferenceThreshold) return Datatype::Quantitative;
  return Datatype::Nominal;
}

Dataset parse_dataset(std::string id, std::string source, std::string_view content,
                      SourceFormat format, const DatatypeOverrides& overrides) {
  if (trim(content).empty()) throw DataError(source + ": empty file");

  std::vector<std::string> headers;
  std::vector<Row> rows;

  if (format == SourceFormat::Csv) {
    std::vector<std::vector<std::string>> records;
    try {
      records = csv::parse(content);
    } catch (const std::runtime_error& e) {
      throw DataError(source + ": " + e.what());
    }
    headers = std::move(records.front());
    if (headers.size() == 1 && headers.front().empty()) throw DataError(source + ": no columns");
    for (std::size_t i = 1; i < records.size(); ++i) {
      auto& rec = records[i];
      if (rec.size() == 1 && rec.front().empty()) continue;  // blank line
      if (rec.size() > headers.size()) {
        throw DataError(source + ": record " + std::to_string(i) + " has " +
                        std::to_string(rec.size()) + " fields, header has " +
                        std::to_string(headers.size()));
      }
      rec.resize(headers.size());
      rows.push_back(std::move(rec));
    }
  } else {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(source + ": " + e.what());
    }
    if (!doc.is_array()) throw DataError(source + ": expected a JSON array of objects");
    for (const auto& rec : doc) {
      if (!rec.is_object()) throw DataError(source + ": expected a JSON array of objects");
      for (const auto& [key, value] : rec.items()) {
        if (std::find(headers.begin(), headers.end(), key) == headers.end()) headers.push_back(key);
      }
    }
    for (const auto& rec : doc) {
      Row row(headers.size());
      for (std::size_t c = 0; c < headers.size(); ++c) {
        if (auto it = rec.find(headers[c]); it != rec.end()) row[c] = stringify(*it);
      }
      rows.push_back(std::move(row));
    }
  }
  return build(std::move(id), std::move(source), std::move(headers), std::move(rows), overrides);
}

Dataset ingest(const std::filesystem::path& source, SourceFormat format) {
  const std::string content = read_file(source);
  DatatypeOverrides overrides;
  if (const auto sidecar = overrides_path_for(source); std::filesystem::exists(sidecar)) {
    overrides = parse_overrides(read_file(sidecar));
  }
  return parse_dataset(source.stem().string(), source.string(), content, format, overrides);
}

Dataset ingest(const std::filesystem::path& source) {
  const auto ext = lower(source.extension().string());
  return ingest(source, ext == ".json" ? SourceFormat::JsonRecords : SourceFormat::Csv);
}

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count,
                                        std::uint64_t seed) {
  std::vector<std::size_t> pool(population);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  const std::size_t k = std::min(count, population);

  std::mt19937_64 gen(seed);
  // Unbiased draw in [0, n): reject the short tail below 2^64 mod n.
  auto bounded = [&gen](std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = gen();
      if (r >= threshold) return r % n;
    }
  };
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(bounded(population - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::string data_url_for(std::string_view source) {
  if (source.starts_with("http://") || source.starts_with("https://")) return std::string(source);
  return std::filesystem::path(source).filename().string();
}

DataSubset subset(const Dataset& dataset, std::uint64_t seed) {
  DataSubset out;
  out.dataset_id = dataset.id();
  out.data_url = data_url_for(dataset.source());
  out.headers = dataset.attribute_names();
  out.seed = seed;
  for (std::size_t i : sample_indices(dataset.row_count(), kSubsetRows, seed)) {
    out.sample_rows.push_back(dataset.rows()[i]);
  }
  return out;
}

std::string render_subset(const DataSubset& subset) {
  std::string out = csv::join_line(subset.headers);
  for (const auto& row : subset.sample_rows) {
    out.push_back('\n');
    out += csv::join_line(row);
  }
  return out;
}

}  // namespace vizprompt
