#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizprompt/dataset.hpp"

namespace vizprompt {

/// Directory-backed catalogue of datasets. A dataset with id `movies` lives
/// at `<dir>/movies.csv` or `<dir>/movies.json`, with an optional
/// `<dir>/movies.types` override sidecar. Loaded datasets are cached.
class DatasetRegistry {
 public:
  explicit DatasetRegistry(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }

  /// nullptr when no file exists for `id`.
  std::shared_ptr<const Dataset> find(const std::string& id) const;

  /// Throws DataError for unknown ids.
  std::shared_ptr<const Dataset> get(const std::string& id) const;

  /// Writes CSV content as `<dir>/<id>.csv` and ingests it. Throws
  /// DataError when the id is malformed, taken, or the content invalid.
  std::shared_ptr<const Dataset> add_csv(const std::string& id, std::string_view content);

  /// Copies a data file (and its sidecar) into the directory under its stem.
  std::shared_ptr<const Dataset> import_file(const std::filesystem::path& file);

  std::vector<std::string> ids() const;

  static bool valid_id(std::string_view id);

 private:
  std::filesystem::path file_for(const std::string& id) const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::shared_ptr<const Dataset>> cache_;
};

/// `{id, source, rows, attributes: [{name, datatype, sample}]}`.
nlohmann::ordered_json schema_json(const Dataset& dataset);

}  // namespace vizprompt
