#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "assr/hypnogram.hpp"
#include "assr/manifest.hpp"
#include "assr/stage.hpp"

namespace assr {

// Per-stage signal recipe, in microvolts.
struct StageProfile {
  std::array<double, 4> band_amplitude{};  // delta, theta, alpha, beta
  double noise = 0;                        // white-noise standard deviation
};

struct SynthConfig {
  int n_patients = 13;
  int epochs_per_patient = 240;
  double fs = 128.0;
  double mains_hz = 50.0;
  double mains_amplitude = 20.0;
  // Awake, NREM1, NREM2, SWS, REM.
  std::array<StageProfile, kNumClasses> profiles = {{
      {{6.0, 6.0, 40.0, 12.0}, 4.0},   // alpha-dominant relaxed wake
      {{10.0, 30.0, 6.0, 5.0}, 4.0},   // theta
      {{20.0, 25.0, 3.0, 22.0}, 4.0},  // theta plus spindle-band activity
      {{90.0, 12.0, 3.0, 3.0}, 4.0},   // delta-dominant
      {{6.0, 14.0, 8.0, 10.0}, 8.0},   // low-amplitude mixed
  }};
  std::array<std::array<double, kNumClasses>, kNumClasses> transition = StickyTransitions(0.92);
  int components_per_band = 3;
  double amplitude_jitter = 0.15;  // log-normal sigma applied per epoch and band
  double artifact_probability = 0.01;
  double physical_range = 1000.0;  // EDF physical range is +/- this value
  uint64_t seed = 0;

  static std::array<std::array<double, kNumClasses>, kNumClasses> StickyTransitions(double stay);
};

// Throws InvalidConfig.
void ValidateSynthConfig(const SynthConfig& cfg);

struct SynthPatient {
  std::string patient_id;
  Hypnogram hypnogram;  // pre-merge labels as written to disk
  std::vector<double> eeg;
  std::vector<double> eog;
};

SynthPatient SynthesizePatient(const SynthConfig& cfg, int index);

// Writes <id>.edf, <id>_stage.txt and manifest.json into `out_dir` and
// returns the manifest. Throws IoFailure.
DatasetManifest SynthGenerate(const SynthConfig& cfg, const std::string& out_dir);

}  // namespace assr
