#include "assr/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include "assr/error.hpp"
#include "assr/hypnogram.hpp"
#include "json.hpp"

namespace assr {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

const ManifestEntry& DatasetManifest::Find(const std::string& patient_id) const {
  for (const auto& e : entries) {
    if (e.patient_id == patient_id) return e;
  }
  throw Error(ErrorCode::kInvalidConfig, "patient '" + patient_id + "' is not in the manifest");
}

void ValidateManifest(const DatasetManifest& manifest) {
  std::set<std::string> ids;
  for (const auto& e : manifest.entries) {
    if (!ids.insert(e.patient_id).second) {
      throw Error(ErrorCode::kInvalidConfig, "duplicate patient id '" + e.patient_id + "'");
    }
  }
  if (!manifest.split) return;
  std::set<std::string> train(manifest.split->train_ids.begin(), manifest.split->train_ids.end());
  for (const auto& id : manifest.split->test_ids) {
    if (train.count(id)) {
      throw Error(ErrorCode::kInvalidConfig, "patient '" + id + "' is in both train and test");
    }
  }
  for (const auto* group : {&manifest.split->train_ids, &manifest.split->test_ids}) {
    for (const auto& id : *group) {
      if (!ids.count(id)) {
        throw Error(ErrorCode::kInvalidConfig, "split names unknown patient '" + id + "'");
      }
    }
  }
}

DatasetManifest SplitPatients(const DatasetManifest& manifest, std::size_t n_train,
                              std::size_t n_test, uint64_t seed) {
  ValidateManifest(manifest);
  if (n_train + n_test > manifest.entries.size()) {
    throw Error(ErrorCode::kInsufficientPatients,
                "requested " + std::to_string(n_train) + "+" + std::to_string(n_test) +
                    " patients, manifest has " + std::to_string(manifest.entries.size()));
  }
  std::vector<std::string> ids;
  for (const auto& e : manifest.entries) ids.push_back(e.patient_id);
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  DatasetManifest out = manifest;
  PatientSplit split;
  split.seed = seed;
  split.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                        ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
  out.split = std::move(split);
  ValidateManifest(out);
  return out;
}

std::string ManifestToJson(const DatasetManifest& manifest) {
  Json doc;
  doc["format"] = "assr-manifest";
  doc["version"] = kManifestVersion;
  doc["entries"] = Json::array();
  for (const auto& e : manifest.entries) {
    Json j;
    j["patient_id"] = e.patient_id;
    j["signal"] = e.signal_path;
    j["hypnogram"] = e.hypnogram_path;
    doc["entries"].push_back(std::move(j));
  }
  if (manifest.split) {
    Json s;
    s["seed"] = manifest.split->seed;
    s["train"] = manifest.split->train_ids;
    s["test"] = manifest.split->test_ids;
    doc["split"] = std::move(s);
  }
  return doc.dump(2) + "\n";
}

DatasetManifest ManifestFromJson(const std::string& text, const std::string& base_dir) {
  DatasetManifest m;
  try {
    const Json doc = Json::parse(text);
    if (doc.value("format", "") != "assr-manifest") {
      throw Error(ErrorCode::kSchemaMismatch, "not an assr manifest");
    }
    if (doc.at("version").get<int>() != kManifestVersion) {
      throw Error(ErrorCode::kSchemaMismatch, "unsupported manifest version");
    }
    auto resolve = [&](const std::string& p) {
      if (base_dir.empty() || fs::path(p).is_absolute()) return p;
      return (fs::path(base_dir) / p).lexically_normal().string();
    };
    for (const auto& j : doc.at("entries")) {
      m.entries.push_back({j.at("patient_id").get<std::string>(),
                           resolve(j.at("signal").get<std::string>()),
                           resolve(j.at("hypnogram").get<std::string>())});
    }
    if (doc.contains("split")) {
      const auto& s = doc["split"];
      m.split = PatientSplit{s.at("train").get<std::vector<std::string>>(),
                             s.at("test").get<std::vector<std::string>>(),
                             s.at("seed").get<uint64_t>()};
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, std::string("manifest: ") + e.what());
  }
  ValidateManifest(m);
  return m;
}

DatasetManifest LoadManifest(const std::string& path) {
  return ManifestFromJson(ReadTextFile(path), fs::path(path).parent_path().string());
}

void SaveManifest(const DatasetManifest& manifest, const std::string& path) {
  const fs::path base = fs::absolute(fs::path(path)).parent_path();
  DatasetManifest out = manifest;
  for (auto& e : out.entries) {
    for (std::string* p : {&e.signal_path, &e.hypnogram_path}) {
      const fs::path rel = fs::absolute(*p).lexically_normal().lexically_relative(base);
      if (!rel.empty()) *p = rel.generic_string();
    }
  }
  WriteTextFile(path, ManifestToJson(out));
}

}  // namespace assr
