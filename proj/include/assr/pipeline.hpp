#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "assr/config.hpp"
#include "assr/dbn.hpp"
#include "assr/edf.hpp"
#include "assr/gp.hpp"
#include "assr/hmm.hpp"
#include "assr/hypnogram.hpp"
#include "assr/manifest.hpp"
#include "assr/prediction.hpp"
#include "assr/preprocess.hpp"
#include "assr/rf.hpp"
#include "assr/tf_features.hpp"

namespace assr {

inline constexpr std::size_t kNumUnsupFeatures = 15;
inline constexpr std::size_t kNumJointFeatures = kNumTfFeatures + kNumUnsupFeatures;
inline constexpr double kStdFloor = 1e-9;

// TF features first, then the unsupervised ones. Throws LengthMismatch unless
// the unsupervised part has `unsup_dim` entries.
std::vector<double> JoinFeatures(const TfFeatureVector& tf, std::span<const double> unsup,
                                 std::size_t unsup_dim = kNumUnsupFeatures);

struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> std;  // population std, floored at kStdFloor

  std::size_t dim() const { return mean.size(); }
};

// Rows of X are samples. Throws EmptyData.
StandardizationStats FitStandardization(const Eigen::MatrixXd& X);
// (x - mean) / std; dimensions that were constant in training map to 0.
std::vector<double> Standardize(const StandardizationStats& stats, std::span<const double> x);
Eigen::MatrixXd StandardizeRows(const StandardizationStats& stats, const Eigen::MatrixXd& X);

// Majority of the three labels, else the GP's.
Stage EnsembleVote(const Prediction& gp, const Prediction& rf, Stage hmm_label);
Stage EnsembleVote(Stage gp, Stage rf, Stage hmm);

struct EpochPrediction {
  std::size_t epoch_index = 0;
  Stage label = Stage::kAwake;
  std::array<Stage, kSubEpochsPerEpoch> sub_epoch_labels{};
  std::array<double, kNumClasses> gp_probability_sums{};
  // Epoch-level decisions of the individual classifiers (same aggregation
  // rule applied to each one's sub-epoch labels): GP, RF, HMM.
  std::array<Stage, 3> method_labels{};
  std::optional<Stage> truth;  // merged reference label, if known
};

// Mode of the five labels; ties by summed GP probability, then stage order.
// Throws WrongCount.
EpochPrediction AggregateEpoch(std::span<const Stage> sub_labels,
                               std::span<const ClassProbabilities> gp_probs);

// Preprocessed, segmented recording. Labels are merged (NREM3/4 -> SWS);
// Excluded stays Excluded.
struct PreparedRecording {
  std::string patient_id;
  std::vector<Epoch> epochs;
  RecordingStats stats;
};

// Finds the configured channel, falling back to the aliases.
Recording LoadEegChannel(const std::string& edf_path, const PipelineConfig& cfg);
PreparedRecording PrepareRecording(const Recording& rec, const Hypnogram* hyp, const AssrConfig& cfg);

std::size_t FeatureDim(FeatureSet set, std::size_t unsup_dim = kNumUnsupFeatures);

// One row per sub-epoch, epoch-major, of the raw (unstandardized) features.
// `dbn` may be null for FeatureSet::kTf.
Eigen::MatrixXd SubEpochFeatures(const std::vector<Epoch>& epochs, const RecordingStats& stats,
                                 const AssrConfig& cfg, FeatureSet set, const DbnModel* dbn);

// Selected, balanced training material shared by every model trained on it.
struct TrainingCorpus {
  std::vector<PreparedRecording> recordings;
  // (recording, epoch) pairs after transition removal and class balancing.
  std::vector<std::pair<std::size_t, std::size_t>> selected;
  // Contiguous non-Excluded label runs at sub-epoch granularity.
  std::vector<std::vector<Stage>> label_sequences;
};

TrainingCorpus BuildTrainingCorpus(const DatasetManifest& manifest, const std::vector<std::string>& train_ids,
                                   const AssrConfig& cfg);

// Scaled sub-epochs of the selected epochs, one per row.
Eigen::MatrixXd DbnInputMatrix(const TrainingCorpus& corpus, const AssrConfig& cfg);

struct DbnTraining {
  DbnModel model;
  std::optional<ArchSelection> search;
  std::vector<double> fine_tune_msre;
};

// Architecture search (when enabled), greedy training and fine-tuning.
DbnTraining TrainFeatureDbn(const TrainingCorpus& corpus, const AssrConfig& cfg);

inline constexpr int kBundleVersion = 1;

struct ModelBundle {
  int schema_version = kBundleVersion;
  uint64_t seed = 0;
  AssrConfig config;
  FeatureSet feature_set = FeatureSet::kJoint;
  std::optional<DbnModel> dbn;  // absent for TF-only bundles
  StandardizationStats standardization;
  GpModel gp;
  RfModel rf;
  HmmModel hmm;
};

// Fits standardization, GP, RF and HMM on the corpus features.
ModelBundle TrainClassifiers(const TrainingCorpus& corpus, const AssrConfig& cfg, FeatureSet set,
                             const std::optional<DbnModel>& dbn, uint64_t seed);

// Full training run on the split's train ids. The config's component seeds
// are derived from `seed`. Throws InvalidConfig when the split is missing or
// has no training ids.
ModelBundle TrainAll(const DatasetManifest& manifest, AssrConfig cfg, uint64_t seed,
                     DbnTraining* dbn_info = nullptr);

// Predictions for every epoch of a prepared recording.
std::vector<EpochPrediction> ClassifyPrepared(const ModelBundle& bundle, const PreparedRecording& rec);

// Epochs that count for evaluation: labelled, and (optionally) not transitions.
std::vector<EpochPrediction> EvaluableEpochs(const std::vector<EpochPrediction>& all,
                                             bool remove_transitions);

// Preprocesses and classifies. Without a hypnogram every epoch is returned;
// with one, only the evaluable epochs under the bundle's transition setting.
std::vector<EpochPrediction> ClassifyRecording(const ModelBundle& bundle, const Recording& rec,
                                               const Hypnogram* hyp = nullptr);

// Bundle directory: bundle.json, dbn.json (if any), gp.json, rf.json,
// hmm.json and a SHA-256 checksum list in MANIFEST.sha256.
void SaveBundle(const ModelBundle& bundle, const std::string& dir);
// Verifies checksums and schema version. Throws IoFailure, SchemaMismatch.
ModelBundle LoadBundle(const std::string& dir);

std::string Sha256Hex(std::string_view data);

// Delimited prediction table: patient_id, epoch_index, predicted, true, sub0..sub4.
std::string FormatPredictionTable(const std::string& patient_id, const std::vector<EpochPrediction>& preds);

// TF features of the corpus' selected sub-epochs with their labels.
std::string FormatTfFeatureTable(const TrainingCorpus& corpus, const AssrConfig& cfg);

}  // namespace assr
