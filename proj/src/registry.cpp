#include "vizprompt/registry.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace vizprompt {

namespace fs = std::filesystem;

DatasetRegistry::DatasetRegistry(fs::path dir) : dir_(std::move(dir)) {}

bool DatasetRegistry::valid_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  }) && id.front() != '.';
}

fs::path DatasetRegistry::file_for(const std::string& id) const {
  for (const char* ext : {".csv", ".json"}) {
    auto p = dir_ / (id + ext);
    if (fs::exists(p)) return p;
  }
  return {};
}

std::shared_ptr<const Dataset> DatasetRegistry::find(const std::string& id) const {
  if (!valid_id(id)) return nullptr;
  std::lock_guard lock(mu_);
  if (auto it = cache_.find(id); it != cache_.end()) return it->second;
  const auto path = file_for(id);
  if (path.empty()) return nullptr;
  auto ds = std::make_shared<const Dataset>(ingest(path));
  cache_.emplace(id, ds);
  return ds;
}

std::shared_ptr<const Dataset> DatasetRegistry::get(const std::string& id) const {
  auto ds = find(id);
  if (!ds) throw DataError("unknown dataset '" + id + "'");
  return ds;
}

std::shared_ptr<const Dataset> DatasetRegistry::add_csv(const std::string& id,
                                                        std::string_view content) {
  if (!valid_id(id)) throw DataError("invalid dataset id '" + id + "'");
  std::lock_guard lock(mu_);
  if (cache_.contains(id) || !file_for(id).empty()) {
    throw DataError("dataset '" + id + "' already exists");
  }
  const auto path = dir_ / (id + ".csv");
  // Validate before anything touches the directory.
  auto ds = std::make_shared<const Dataset>(
      parse_dataset(id, path.string(), content, SourceFormat::Csv));
  fs::create_directories(dir_);
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw DataError("cannot write " + path.string());
  cache_.emplace(id, ds);
  return ds;
}

std::shared_ptr<const Dataset> DatasetRegistry::import_file(const fs::path& file) {
  const std::string id = file.stem().string();
  if (!valid_id(id)) throw DataError("invalid dataset id '" + id + "'");
  auto ds = std::make_shared<const Dataset>(ingest(file));
  fs::create_directories(dir_);
  const auto target = dir_ / file.filename();
  std::error_code ec;
  if (!fs::exists(target) || !fs::equivalent(file, target, ec)) {
    fs::copy_file(file, target, fs::copy_options::overwrite_existing);
    if (const auto sidecar = overrides_path_for(file); fs::exists(sidecar)) {
      fs::copy_file(sidecar, overrides_path_for(target), fs::copy_options::overwrite_existing);
    }
  }
  std::lock_guard lock(mu_);
  cache_[id] = ds;
  return ds;
}

std::vector<std::string> DatasetRegistry::ids() const {
  std::set<std::string> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir_, ec)) {
    const auto ext = entry.path().extension();
    if (ext == ".csv" || ext == ".json") {
      const auto id = entry.path().stem().string();
      if (valid_id(id)) out.insert(id);
    }
  }
  std::lock_guard lock(mu_);
  for (const auto& [id, ds] : cache_) out.insert(id);
  return {out.begin(), out.end()};
}

nlohmann::ordered_json schema_json(const Dataset& dataset) {
  nlohmann::ordered_json j;
  j["id"] = dataset.id();
  j["source"] = data_url_for(dataset.source());
  j["rows"] = dataset.row_count();
  auto attrs = nlohmann::ordered_json::array();
  for (const auto& a : dataset.attributes()) {
    nlohmann::ordered_json e;
    e["name"] = a.name;
    e["datatype"] = std::string(to_string(a.datatype));
    e["sample"] = a.distinct_sample;
    attrs.push_back(std::move(e));
  }
  j["attributes"] = std::move(attrs);
  return j;
}

}  // namespace vizprompt
