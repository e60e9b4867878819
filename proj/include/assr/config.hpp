#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "assr/dbn.hpp"
#include "assr/gp.hpp"
#include "assr/hypnogram.hpp"
#include "assr/preprocess.hpp"
#include "assr/rf.hpp"
#include "assr/tf_features.hpp"

namespace assr {

enum class FeatureSet { kTf, kUnsup, kJoint };

std::string FeatureSetName(FeatureSet set);
FeatureSet ParseFeatureSet(const std::string& name);

struct DbnSection {
  DbnTrainConfig train;
  ArchCandidate architecture = DefaultArchitecture();
  std::vector<ArchCandidate> candidates = DefaultArchCandidates();
  bool architecture_search = false;
  InputScaling scaling;
};

struct PipelineConfig {
  std::string channel = "C3-A2";
  // Tried in order when `channel` is absent (recordings label the same
  // derivation differently).
  std::vector<std::string> channel_aliases = {"C3A2", "EEG C3-A2", "C3-M2"};
  StageMapping stage_mapping = DefaultStageMapping();
  FeatureSet feature_set = FeatureSet::kJoint;
};

struct ExperimentConfig {
  int n_train = 10;
  int n_test = 3;
};

// Everything that shapes a run except the master seed.
struct AssrConfig {
  PreprocessConfig preprocess;
  FeatureConfig features;
  DbnSection dbn;
  GpConfig gp;
  RfConfig rf;
  PipelineConfig pipeline;
  ExperimentConfig experiment;
};

inline constexpr int kConfigVersion = 1;

// Derives every component seed from the master seed.
void ApplySeed(AssrConfig& cfg, uint64_t seed);

// Throws InvalidConfig.
void ValidateConfig(const AssrConfig& cfg);

// Structured text form; component seeds are not part of the document.
std::string ConfigToJson(const AssrConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
AssrConfig ConfigFromJson(const std::string& text);
AssrConfig LoadConfig(const std::string& path);

}  // namespace assr
