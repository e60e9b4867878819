#include "assr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "assr/edf.hpp"
#include "assr/error.hpp"
#include "assr/random.hpp"

namespace assr {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::array<double, 2>, 4> kBands = {{{0.5, 4.0}, {4.0, 8.0}, {8.0, 13.0}, {13.0, 20.0}}};
constexpr int kArtifactCode = 6;

// Hypnogram codes of the default mapping.
int StageCode(Stage s, std::mt19937_64& rng) {
  switch (s) {
    case Stage::kAwake: return 0;
    case Stage::kRem: return 1;
    case Stage::kNrem1: return 2;
    case Stage::kNrem2: return 3;
    default: return std::bernoulli_distribution(0.5)(rng) ? 4 : 5;
  }
}

std::vector<Stage> StageChain(const SynthConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<Stage> out;
    std::size_t state = ClassIndex(Stage::kAwake);
    std::array<bool, kNumClasses> seen{};
    for (int e = 0; e < cfg.epochs_per_patient; ++e) {
      if (e > 0) {
        const double r = u(rng);
        double acc = 0;
        std::size_t next = kNumClasses - 1;
        for (std::size_t k = 0; k < kNumClasses; ++k) {
          acc += cfg.transition[state][k];
          if (r < acc) {
            next = k;
            break;
          }
        }
        state = next;
      }
      seen[state] = true;
      out.push_back(ClassAt(state));
    }
    const bool complete = std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
    if (complete || cfg.epochs_per_patient < 200) return out;
  }
  throw Error(ErrorCode::kInvalidConfig, "transition matrix never visits every stage");
}

}  // namespace

std::array<std::array<double, kNumClasses>, kNumClasses> SynthConfig::StickyTransitions(double stay) {
  std::array<std::array<double, kNumClasses>, kNumClasses> t{};
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      t[i][j] = i == j ? stay : (1.0 - stay) / static_cast<double>(kNumClasses - 1);
    }
  }
  return t;
}

void ValidateSynthConfig(const SynthConfig& cfg) {
  if (cfg.n_patients < 1 || cfg.epochs_per_patient < 1) {
    throw Error(ErrorCode::kInvalidConfig, "synthetic dataset needs at least one patient and epoch");
  }
  if (!(cfg.fs > 2 * kBands.back()[1]) || std::abs(cfg.fs * kEpochSeconds - std::round(cfg.fs * kEpochSeconds)) > 1e-9) {
    throw Error(ErrorCode::kInvalidConfig, "sampling rate must exceed 40 Hz and give whole samples per epoch");
  }
  for (const auto& p : cfg.profiles) {
    if (p.noise < 0 || std::any_of(p.band_amplitude.begin(), p.band_amplitude.end(), [](double a) { return a < 0; })) {
      throw Error(ErrorCode::kInvalidConfig, "stage amplitudes must be non-negative");
    }
  }
  for (const auto& row : cfg.transition) {
    double sum = 0;
    for (double v : row) {
      if (v < 0) throw Error(ErrorCode::kInvalidConfig, "transition probabilities must be non-negative");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::kInvalidConfig, "transition rows must sum to 1");
  }
  if (cfg.components_per_band < 1 || cfg.amplitude_jitter < 0 || cfg.artifact_probability < 0 ||
      cfg.artifact_probability > 1 || !(cfg.physical_range > 0) || cfg.mains_amplitude < 0) {
    throw Error(ErrorCode::kInvalidConfig, "invalid synthetic signal parameters");
  }
}

SynthPatient SynthesizePatient(const SynthConfig& cfg, int index) {
  ValidateSynthConfig(cfg);
  std::mt19937_64 rng(MixSeed(MixSeed(cfg.seed, kStreamSynth), static_cast<uint64_t>(index)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  SynthPatient out;
  char id[32];
  std::snprintf(id, sizeof id, "synth%02d", index + 1);
  out.patient_id = id;

  const std::vector<Stage> chain = StageChain(cfg, rng);
  const auto n_epoch = static_cast<std::size_t>(std::llround(cfg.fs * kEpochSeconds));
  out.eeg.resize(chain.size() * n_epoch);
  out.eog.resize(out.eeg.size());
  const auto mapping = DefaultStageMapping();
  const double two_pi = 2.0 * std::numbers::pi;
  const double per_component = 1.0 / std::sqrt(static_cast<double>(cfg.components_per_band));

  for (std::size_t e = 0; e < chain.size(); ++e) {
    const StageProfile& prof = cfg.profiles[ClassIndex(chain[e])];
    double* x = out.eeg.data() + e * n_epoch;
    for (std::size_t b = 0; b < kBands.size(); ++b) {
      const double amp = prof.band_amplitude[b] * std::exp(cfg.amplitude_jitter * normal(rng)) * per_component;
      const double lo = kBands[b][0] + 0.25, hi = kBands[b][1] - 0.25;
      for (int c = 0; c < cfg.components_per_band; ++c) {
        const double f = lo + (hi - lo) * u(rng);
        const double phase = two_pi * u(rng);
        // Peak amplitude sqrt(2) * amp gives RMS amp per band.
        for (std::size_t i = 0; i < n_epoch; ++i) {
          x[i] += std::numbers::sqrt2 * amp * std::sin(two_pi * f * static_cast<double>(i) / cfg.fs + phase);
        }
      }
    }
    for (std::size_t i = 0; i < n_epoch; ++i) x[i] += prof.noise * normal(rng);

    int code = StageCode(chain[e], rng);
    if (u(rng) < cfg.artifact_probability) {
      code = kArtifactCode;
      for (std::size_t i = 0; i < n_epoch; ++i) x[i] += 150.0 * normal(rng);
    }
    out.hypnogram.stages.push_back(mapping.at(code));
  }

  const double mains_phase = two_pi * u(rng);
  double drift = 0;
  for (std::size_t i = 0; i < out.eeg.size(); ++i) {
    const double t = static_cast<double>(i) / cfg.fs;
    out.eeg[i] += cfg.mains_amplitude * std::sin(two_pi * cfg.mains_hz * t + mains_phase);
    out.eeg[i] = std::clamp(out.eeg[i], -cfg.physical_range, cfg.physical_range);
    drift = 0.999 * drift + normal(rng);
    out.eog[i] = std::clamp(drift + 10.0 * normal(rng), -cfg.physical_range, cfg.physical_range);
  }
  return out;
}

DatasetManifest SynthGenerate(const SynthConfig& cfg, const std::string& out_dir) {
  ValidateSynthConfig(cfg);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + out_dir + ": " + ec.message());
  const auto mapping = DefaultStageMapping();
  const int spr = static_cast<int>(std::llround(cfg.fs * kEpochSeconds));

  DatasetManifest manifest;
  for (int p = 0; p < cfg.n_patients; ++p) {
    SynthPatient patient = SynthesizePatient(cfg, p);
    EdfHeader header;
    header.patient_id = patient.patient_id;
    header.recording_id = "synthetic";
    header.start_datetime = {2020, 1, 1, 22, 0, 0};
    header.num_records = static_cast<int64_t>(patient.hypnogram.stages.size());
    header.record_duration_s = kEpochSeconds;
    for (const char* label : {"C3-A2", "EOG"}) {
      SignalSpec spec;
      spec.label = label;
      spec.transducer = "synthetic";
      spec.physical_dimension = "uV";
      spec.physical_min = -cfg.physical_range;
      spec.physical_max = cfg.physical_range;
      spec.samples_per_record = spr;
      header.signals.push_back(spec);
    }
    std::vector<Recording> recs = {{patient.patient_id, "C3-A2", std::move(patient.eeg), cfg.fs},
                                   {patient.patient_id, "EOG", std::move(patient.eog), cfg.fs}};
    const fs::path edf = fs::path(out_dir) / (patient.patient_id + ".edf");
    const fs::path hyp = fs::path(out_dir) / (patient.patient_id + "_stage.txt");
    WriteFileBytes(edf.string(), WriteEdf(header, recs));
    WriteTextFile(hyp.string(), FormatHypnogram(patient.hypnogram, mapping));
    manifest.entries.push_back({patient.patient_id, edf.string(), hyp.string()});
  }
  SaveManifest(manifest, (fs::path(out_dir) / "manifest.json").string());
  return manifest;
}

}  // namespace assr
