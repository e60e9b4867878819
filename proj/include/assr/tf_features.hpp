#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace assr {

struct PsdEstimate {
  std::vector<double> freqs;
  std::vector<double> power;

  double resolution() const { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }
};

// [low, high), or [low, high] when closed_high is set.
struct FrequencyBand {
  std::string name;
  double low = 0;
  double high = 0;
  bool closed_high = false;

  bool Contains(double f) const { return f >= low && (closed_high ? f <= high : f < high); }
};

struct FeatureConfig {
  std::array<FrequencyBand, 5> bands = {{{"delta", 0.5, 4.0, false},
                                         {"theta", 4.0, 8.0, false},
                                         {"alpha", 8.0, 13.0, false},
                                         {"beta", 13.0, 20.0, false},
                                         {"gamma", 20.0, 32.0, true}}};
  int entropy_bins = 32;
  double harmonic_low = 0.5;
  double harmonic_high = 32.0;
  int welch_segment = 128;
  int welch_overlap = 64;
};

void ValidateFeatureConfig(const FeatureConfig& cfg, double fs);

// Degenerate-input markers carried alongside a feature vector.
enum FeatureFlag : uint32_t {
  kFlagNone = 0,
  kFlagZeroTotalPower = 1u << 0,
  kFlagZeroBandPower = 1u << 1,
  kFlagConstantSignal = 1u << 2,
};

inline constexpr std::size_t kNumTfFeatures = 14;

// Order: rel_power(delta..gamma), entropy, f_c, f_delta, s_fc, activity,
// mobility, complexity, skew, kurt.
struct TfFeatureVector {
  std::array<double, kNumTfFeatures> values{};
  uint32_t flags = kFlagNone;

  double entropy() const { return values[5]; }
  double f_c() const { return values[6]; }
  double f_delta() const { return values[7]; }
  double s_fc() const { return values[8]; }
  double activity() const { return values[9]; }
  double mobility() const { return values[10]; }
  double complexity() const { return values[11]; }
  double skew() const { return values[12]; }
  double kurt() const { return values[13]; }
};

const std::array<std::string, kNumTfFeatures>& TfFeatureNames();

// Welch estimate: Hann (periodic) segments, one-sided density scaling.
PsdEstimate ComputePsd(std::span<const double> x, double fs, int segment = 128, int overlap = 64);

struct BandPowers {
  std::array<double, 5> relative{};
  bool zero_total = false;
};

// Share of each band in the summed power of the five bands. An all-zero
// PSD yields 1/5 each with zero_total set.
BandPowers RelativeBandPowers(const PsdEstimate& psd, const std::array<FrequencyBand, 5>& bands);

// Shannon entropy (natural log) of an N-bin histogram over [min, max].
double HistogramEntropy(std::span<const double> x, int bins);

struct HarmonicParameters {
  double f_c = 0;
  double f_delta = 0;
  double s_fc = 0;
  bool zero_band = false;
};

// Power-weighted centre frequency, spread and the PSD at the bin nearest
// the centre, over [f_low, f_high].
HarmonicParameters ComputeHarmonicParameters(const PsdEstimate& psd, double f_low, double f_high);

struct HjorthParameters {
  double activity = 0;
  double mobility = 0;
  double complexity = 0;
};

HjorthParameters ComputeHjorth(std::span<const double> x);

struct Moments {
  double skew = 0;
  double kurt = 0;
  bool constant = false;
};

Moments SkewnessKurtosis(std::span<const double> x);

TfFeatureVector ExtractTf(std::span<const double> sub_epoch, const FeatureConfig& cfg,
                          double fs = 64.0);

}  // namespace assr
