#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "assr/config.hpp"
#include "assr/manifest.hpp"
#include "assr/pipeline.hpp"
#include "assr/stage.hpp"

namespace assr {

struct ConfusionMatrix {
  std::array<std::array<long, kNumClasses>, kNumClasses> counts{};  // [true][predicted]
  std::array<std::array<double, kNumClasses>, kNumClasses> row_percent{};
  double total_accuracy = 0;  // percent

  long total() const;
  long row_total(Stage truth) const;
  // Percent of the class' epochs classified correctly; 0 for an empty row.
  double ClassAccuracy(Stage s) const;
};

// Throws LengthMismatch, Empty.
ConfusionMatrix ComputeConfusion(std::span<const Stage> predicted, std::span<const Stage> truth);
// From already tallied counts. Throws Empty when every count is zero.
ConfusionMatrix ConfusionFromCounts(const std::array<std::array<long, kNumClasses>, kNumClasses>& counts);

inline constexpr std::array<const char*, 4> kMethodNames = {"GP", "RF", "HMM", "Ensemble"};

struct AblationRow {
  FeatureSet set = FeatureSet::kJoint;
  int dim = 0;
  std::array<double, 4> accuracy{};  // total accuracy per method, kMethodNames order
};

struct PatientResult {
  std::string patient_id;
  std::vector<EpochPrediction> all_epochs;  // every epoch of the recording
  std::vector<EpochPrediction> evaluated;   // the subset scored
};

struct ExperimentReport {
  uint64_t seed = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  FeatureSet feature_set = FeatureSet::kJoint;
  int feature_dim = 0;
  ArchCandidate architecture;  // empty for TF-only runs
  std::optional<ArchSelection> search;
  bool transitions_removed = true;
  std::size_t training_epochs = 0;
  double rf_oob_accuracy = 0;
  ConfusionMatrix ensemble;
  std::array<ConfusionMatrix, 3> methods;  // GP, RF, HMM
  std::vector<PatientResult> patients;
  std::vector<AblationRow> ablation;  // empty unless requested
};

// The manifest's own split, else a seeded n_train/n_test split.
DatasetManifest ResolveSplit(const DatasetManifest& manifest, const AssrConfig& cfg, uint64_t seed);

struct ExperimentOptions {
  bool ablation = false;
};

// Split (the manifest's own, else seeded), train on the training patients,
// classify each test recording and pool the confusion matrices.
ExperimentReport RunExperiment(const DatasetManifest& manifest, AssrConfig cfg, uint64_t seed,
                               const ExperimentOptions& options = {});

std::string FormatConfusionTable(const ConfusionMatrix& cm);
std::string FormatReportText(const ExperimentReport& report);
std::string ReportToJson(const ExperimentReport& report);

// Reference and predicted hypnograms as a two-trace step plot.
std::string HypnogramSvg(const PatientResult& patient);

// Pairs every *.edf / *.rec file in `dir` with its <stem>_stage.txt
// hypnogram. Throws IoFailure, Empty.
DatasetManifest ScanDataDir(const std::string& dir);

}  // namespace assr
