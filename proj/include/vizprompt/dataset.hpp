#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vizprompt {

enum class Datatype { Quantitative, Nominal, Ordinal, Temporal };

std::string_view to_string(Datatype type);

/// Case-insensitive; accepts the full names only.
std::optional<Datatype> parse_datatype(std::string_view text);

/// Raised for unreadable or structurally invalid tabular input.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Attribute {
  std::string name;
  Datatype datatype = Datatype::Nominal;
  /// Up to five distinct non-empty values in first-seen order.
  std::vector<std::string> distinct_sample;

  bool operator==(const Attribute&) const = default;
};

/// One record; value i belongs to attribute i.
using Row = std::vector<std::string>;

/// Immutable ingested table. Construction enforces unique non-empty
/// attribute names and one value slot per attribute in every row.
class Dataset {
 public:
  Dataset(std::string id, std::string source, std::vector<Attribute> attributes,
          std::vector<Row> rows);

  const std::string& id() const { return id_; }
  const std::string& source() const { return source_; }
  const std::vector<Attribute>& attributes() const { return attributes_; }
  const std::vector<Row>& rows() const { return rows_; }
  std::size_t row_count() const { return rows_.size(); }

  std::vector<std::string> attribute_names() const;
  const Attribute* find(std::string_view name) const;
  bool has_attribute(std::string_view name) const { return find(name) != nullptr; }

  bool operator==(const Dataset&) const = default;

 private:
  std::string id_;
  std::string source_;
  std::vector<Attribute> attributes_;
  std::vector<Row> rows_;
};

enum class SourceFormat { Csv, JsonRecords };

/// attribute name -> forced datatype. The only way to obtain Ordinal.
using DatatypeOverrides = std::map<std::string, Datatype, std::less<>>;

/// Parses `name = Datatype` lines; blank lines and `#` comments are skipped.
DatatypeOverrides parse_overrides(std::string_view text);

/// Sidecar location for a data file: same directory, same stem, `.types`.
std::filesystem::path overrides_path_for(const std::filesystem::path& data_file);

bool parses_as_number(std::string_view value);

/// ISO-8601 date (optionally with a time part), MM/DD/YYYY, or a bare
/// four-digit year in [1700, 2199].
bool parses_as_date(std::string_view value);

inline constexpr double kInferenceThreshold = 0.95;

/// Temporal if >= 95% of non-empty values are dates, else Quantitative if
/// >= 95% are numbers, else Nominal. Empty values do not vote; a column
/// with no votes is Nominal.
Datatype infer_datatype(std::span<const std::string> values);

/// Builds a Dataset from in-memory content. `source` is recorded as given.
Dataset parse_dataset(std::string id, std::string source, std::string_view content,
                      SourceFormat format, const DatatypeOverrides& overrides = {});

/// Reads a file and its optional `.types` sidecar. The dataset id is the
/// file stem.
Dataset ingest(const std::filesystem::path& source, SourceFormat format);

/// Picks the format from the extension (`.json` -> JsonRecords, else Csv).
Dataset ingest(const std::filesystem::path& source);

inline constexpr std::size_t kSubsetRows = 10;

struct DataSubset {
  std::string dataset_id;
  /// What the prompt tells the model to load: the file name for local
  /// sources, the URL itself for http(s) sources.
  std::string data_url;
  std::vector<std::string> headers;
  std::vector<Row> sample_rows;
  std::uint64_t seed = 0;

  bool operator==(const DataSubset&) const = default;
};

/// Partial Fisher-Yates over [0, population) driven by std::mt19937_64
/// seeded with `seed`; returns min(count, population) indices in
/// ascending order.
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count,
                                        std::uint64_t seed);

DataSubset subset(const Dataset& dataset, std::uint64_t seed);

/// Header line plus one line per sample row, joined by '\n', CSV-quoted.
std::string render_subset(const DataSubset& subset);

std::string data_url_for(std::string_view source);

}  // namespace vizprompt
