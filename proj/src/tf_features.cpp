#include "assr/tf_features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "assr/error.hpp"

namespace assr {

void ValidateFeatureConfig(const FeatureConfig& cfg, double fs) {
  for (std::size_t i = 0; i < cfg.bands.size(); ++i) {
    const auto& b = cfg.bands[i];
    if (!(b.low >= 0 && b.low < b.high && b.high <= fs / 2)) {
      throw Error(ErrorCode::kInvalidConfig, "band '" + b.name + "' is out of range");
    }
    if (i > 0 && b.low < cfg.bands[i - 1].high) {
      throw Error(ErrorCode::kInvalidConfig, "bands must be increasing and non-overlapping");
    }
  }
  if (cfg.entropy_bins < 2) throw Error(ErrorCode::kInvalidConfig, "entropy_bins must be >= 2");
  if (!(cfg.harmonic_low < cfg.harmonic_high && cfg.harmonic_high <= fs / 2)) {
    throw Error(ErrorCode::kInvalidConfig, "harmonic band is out of range");
  }
  if (cfg.welch_segment < 2 || cfg.welch_overlap < 0 || cfg.welch_overlap >= cfg.welch_segment) {
    throw Error(ErrorCode::kInvalidConfig, "invalid Welch segmentation");
  }
}

const std::array<std::string, kNumTfFeatures>& TfFeatureNames() {
  static const std::array<std::string, kNumTfFeatures> names = {
      "rel_delta", "rel_theta", "rel_alpha", "rel_beta",   "rel_gamma", "entropy", "f_c",
      "f_delta",   "s_fc",      "activity",  "mobility",   "complexity", "skew",   "kurt"};
  return names;
}

PsdEstimate ComputePsd(std::span<const double> x, double fs, int segment, int overlap) {
  const std::size_t n = x.size();
  std::size_t seg = std::min<std::size_t>(static_cast<std::size_t>(segment), n);
  PsdEstimate psd;
  if (seg == 0) return psd;
  const std::size_t step = std::max<std::size_t>(1, seg - std::min<std::size_t>(overlap, seg - 1));
  const std::size_t n_bins = seg / 2 + 1;

  std::vector<double> window(seg);
  double window_power = 0;
  for (std::size_t i = 0; i < seg; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(seg));
    window_power += window[i] * window[i];
  }

  // Twiddle table for a direct DFT of the (short) segment.
  std::vector<std::complex<double>> twiddle(seg);
  for (std::size_t i = 0; i < seg; ++i) {
    twiddle[i] = std::polar(1.0, -2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(seg));
  }

  psd.freqs.resize(n_bins);
  psd.power.assign(n_bins, 0.0);
  for (std::size_t k = 0; k < n_bins; ++k) psd.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(seg);

  std::size_t n_segments = 0;
  std::vector<double> buf(seg);
  for (std::size_t start = 0; start + seg <= n; start += step) {
    for (std::size_t i = 0; i < seg; ++i) buf[i] = x[start + i] * window[i];
    for (std::size_t k = 0; k < n_bins; ++k) {
      std::complex<double> acc = 0;
      for (std::size_t i = 0; i < seg; ++i) acc += buf[i] * twiddle[(k * i) % seg];
      psd.power[k] += std::norm(acc);
    }
    ++n_segments;
  }
  const double scale = 1.0 / (fs * window_power * static_cast<double>(n_segments));
  for (std::size_t k = 0; k < n_bins; ++k) {
    psd.power[k] *= scale;
    const bool nyquist = seg % 2 == 0 && k == n_bins - 1;
    if (k != 0 && !nyquist) psd.power[k] *= 2;
  }
  return psd;
}

BandPowers RelativeBandPowers(const PsdEstimate& psd, const std::array<FrequencyBand, 5>& bands) {
  BandPowers out;
  std::array<double, 5> absolute{};
  double total = 0;
  for (std::size_t b = 0; b < bands.size(); ++b) {
    for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
      if (bands[b].Contains(psd.freqs[k])) absolute[b] += psd.power[k];
    }
    total += absolute[b];
  }
  if (!(total > 0)) {
    out.relative.fill(1.0 / 5.0);
    out.zero_total = true;
    return out;
  }
  for (std::size_t b = 0; b < bands.size(); ++b) out.relative[b] = absolute[b] / total;
  return out;
}

double HistogramEntropy(std::span<const double> x, int bins) {
  if (x.empty() || bins < 1) return 0.0;
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (!(range > 0)) return 0.0;
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (double v : x) {
    auto j = static_cast<std::size_t>(std::floor((v - lo) / range * bins));
    counts[std::min(j, counts.size() - 1)]++;
  }
  const double n = static_cast<double>(x.size());
  double h = 0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

HarmonicParameters ComputeHarmonicParameters(const PsdEstimate& psd, double f_low, double f_high) {
  HarmonicParameters out;
  double mass = 0, first = 0;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    const double f = psd.freqs[k];
    if (f < f_low || f > f_high) continue;
    mass += psd.power[k];
    first += f * psd.power[k];
  }
  if (!(mass > 0)) {
    out.zero_band = true;
    return out;
  }
  out.f_c = first / mass;
  double second = 0;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    const double f = psd.freqs[k];
    if (f < f_low || f > f_high) continue;
    second += (f - out.f_c) * (f - out.f_c) * psd.power[k];
  }
  out.f_delta = std::sqrt(second / mass);
  std::size_t nearest = 0;
  double best = std::abs(psd.freqs[0] - out.f_c);
  for (std::size_t k = 1; k < psd.freqs.size(); ++k) {
    const double d = std::abs(psd.freqs[k] - out.f_c);
    if (d < best) {
      best = d;
      nearest = k;
    }
  }
  out.s_fc = psd.power[nearest];
  return out;
}

namespace {

double PopulationVariance(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double mean = 0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(x.size());
}

std::vector<double> Diff(std::span<const double> x) {
  std::vector<double> d;
  if (x.size() < 2) return d;
  d.reserve(x.size() - 1);
  for (std::size_t i = 1; i < x.size(); ++i) d.push_back(x[i] - x[i - 1]);
  return d;
}

}  // namespace

HjorthParameters ComputeHjorth(std::span<const double> x) {
  HjorthParameters out;
  const auto d1 = Diff(x);
  const auto d2 = Diff(d1);
  const double v0 = PopulationVariance(x);
  const double v1 = PopulationVariance(d1);
  const double v2 = PopulationVariance(d2);
  out.activity = v0;
  out.mobility = v0 > 0 ? std::sqrt(v1 / v0) : 0.0;
  out.complexity = (v0 > 0 && v1 > 0) ? std::sqrt(v2 * v0) / v1 : 0.0;
  return out;
}

Moments SkewnessKurtosis(std::span<const double> x) {
  Moments out;
  if (x.size() < 2 || std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) {
    out.constant = true;
    return out;
  }
  const double n = static_cast<double>(x.size());
  double mean = 0;
  for (double v : x) mean += v;
  mean /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  out.skew = m3 / std::pow(m2, 1.5);
  out.kurt = m4 / (m2 * m2);
  return out;
}

TfFeatureVector ExtractTf(std::span<const double> sub_epoch, const FeatureConfig& cfg, double fs) {
  TfFeatureVector out;
  const PsdEstimate psd = ComputePsd(sub_epoch, fs, cfg.welch_segment, cfg.welch_overlap);
  const BandPowers bp = RelativeBandPowers(psd, cfg.bands);
  const HarmonicParameters hp = ComputeHarmonicParameters(psd, cfg.harmonic_low, cfg.harmonic_high);
  const HjorthParameters hj = ComputeHjorth(sub_epoch);
  const Moments mo = SkewnessKurtosis(sub_epoch);

  std::copy(bp.relative.begin(), bp.relative.end(), out.values.begin());
  out.values[5] = HistogramEntropy(sub_epoch, cfg.entropy_bins);
  out.values[6] = hp.f_c;
  out.values[7] = hp.f_delta;
  out.values[8] = hp.s_fc;
  out.values[9] = hj.activity;
  out.values[10] = hj.mobility;
  out.values[11] = hj.complexity;
  out.values[12] = mo.skew;
  out.values[13] = mo.kurt;
  if (bp.zero_total) out.flags |= kFlagZeroTotalPower;
  if (hp.zero_band) out.flags |= kFlagZeroBandPower;
  if (mo.constant) out.flags |= kFlagConstantSignal;
  return out;
}

}  // namespace assr
