#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "assr/hypnogram.hpp"
#include "assr/stage.hpp"

namespace assr {

inline constexpr double kTargetFs = 64.0;
inline constexpr std::size_t kSubEpochsPerEpoch = 5;
inline constexpr std::size_t kEpochSamples = 1920;    // 30 s at 64 Hz
inline constexpr std::size_t kSubEpochSamples = 384;  // 6 s at 64 Hz

struct PreprocessConfig {
  double notch_hz = 50.0;
  double notch_q = 30.0;
  double band_low = 0.3;
  double band_high = 32.0;
  int bandpass_order = 4;
  double target_fs = kTargetFs;
  int resample_taps_per_phase = 64;
  double resample_kaiser_beta = 8.0;
  uint64_t balance_seed = 0;
  bool remove_transitions_on_test = true;
};

// Throws InvalidConfig when the band or rates are inconsistent.
void ValidatePreprocessConfig(const PreprocessConfig& cfg);

struct Epoch {
  std::string patient_id;
  std::size_t epoch_index = 0;
  std::vector<double> samples;
  Stage label = Stage::kExcluded;
};

struct SubEpoch {
  std::size_t epoch_index = 0;
  std::size_t slot = 0;
  std::vector<double> samples;
  Stage label = Stage::kExcluded;
};

struct Segmentation {
  std::vector<Epoch> epochs;
  std::vector<SubEpoch> sub_epochs;
};

// notch -> band-pass -> resample to target_fs. A notch at or above the
// input Nyquist is skipped and the band's upper edge is capped just below it.
std::vector<double> PreprocessSignal(std::span<const double> x, double fs,
                                     const PreprocessConfig& cfg);

// Splits a target-rate signal into labelled 30 s epochs and their five 6 s
// sub-epochs. Trailing partial epochs and epochs past the hypnogram are dropped.
Segmentation Segment(std::span<const double> x, const Hypnogram& hyp,
                     const std::string& patient_id = "", double fs = kTargetFs);

// Same split for an unlabelled signal; every label is Excluded.
Segmentation SegmentUnlabeled(std::span<const double> x, const std::string& patient_id = "",
                              double fs = kTargetFs);

// Splits one epoch into its sub-epochs.
std::vector<SubEpoch> SplitEpoch(const Epoch& epoch);

// keep[i] iff labels i-1, i, i+1 agree (missing neighbours match) and
// label i is not Excluded.
std::vector<bool> TransitionKeepMask(std::span<const Stage> labels);

std::vector<Epoch> RemoveTransitionEpochs(const std::vector<Epoch>& epochs);

// Downsamples every class to the smallest class count, without replacement,
// preserving input order. Throws EmptyInput.
std::vector<Epoch> BalanceClasses(const std::vector<Epoch>& epochs, uint64_t seed);

// Index-level variant of BalanceClasses.
std::vector<std::size_t> BalancedSelection(std::span<const Stage> labels, uint64_t seed);

}  // namespace assr
