#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace assr {

struct ManifestEntry {
  std::string patient_id;
  std::string signal_path;
  std::string hypnogram_path;
};

struct PatientSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  uint64_t seed = 0;
};

// Document layout (JSON):
//   {"format": "assr-manifest", "version": 1,
//    "entries": [{"patient_id": .., "signal": .., "hypnogram": ..}, ...],
//    "split": {"seed": .., "train": [..], "test": [..]}}   // split optional
// Relative paths are resolved against the manifest's directory on load.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::optional<PatientSplit> split;

  const ManifestEntry& Find(const std::string& patient_id) const;
};

inline constexpr int kManifestVersion = 1;

// Throws InvalidConfig on duplicate ids or an overlapping split.
void ValidateManifest(const DatasetManifest& manifest);

// Uniform random disjoint split, deterministic per seed and independent of
// entry order. Throws InsufficientPatients.
DatasetManifest SplitPatients(const DatasetManifest& manifest, std::size_t n_train,
                              std::size_t n_test, uint64_t seed);

std::string ManifestToJson(const DatasetManifest& manifest);
DatasetManifest ManifestFromJson(const std::string& text, const std::string& base_dir = "");

DatasetManifest LoadManifest(const std::string& path);
// Entry paths are written relative to the manifest file's directory.
void SaveManifest(const DatasetManifest& manifest, const std::string& path);

}  // namespace assr
