#include "assr/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "assr/dsp.hpp"
#include "assr/error.hpp"
#include "assr/log.hpp"

namespace assr {

void ValidatePreprocessConfig(const PreprocessConfig& cfg) {
  if (!(cfg.target_fs > 0)) throw Error(ErrorCode::kInvalidConfig, "target_fs must be positive");
  if (!(cfg.band_low > 0 && cfg.band_low < cfg.band_high && cfg.band_high <= cfg.target_fs / 2)) {
    throw Error(ErrorCode::kInvalidConfig, "band must satisfy 0 < low < high <= target_fs/2");
  }
  if (!(cfg.notch_hz > 0) || !(cfg.notch_q > 0)) {
    throw Error(ErrorCode::kInvalidConfig, "notch frequency and Q must be positive");
  }
  if (cfg.bandpass_order < 1 || cfg.resample_taps_per_phase < 2) {
    throw Error(ErrorCode::kInvalidConfig, "filter orders must be positive");
  }
}

std::vector<double> PreprocessSignal(std::span<const double> x, double fs,
                                     const PreprocessConfig& cfg) {
  ValidatePreprocessConfig(cfg);
  std::vector<double> y(x.begin(), x.end());
  if (cfg.notch_hz < fs / 2) {
    y = NotchFilter(y, fs, cfg.notch_hz, cfg.notch_q);
  } else {
    log::Info("notch skipped: line frequency above input Nyquist");
  }
  const double high = std::min(cfg.band_high, 0.98 * fs / 2);
  y = BandpassFilter(y, fs, cfg.band_low, high, cfg.bandpass_order);
  return Resample(y, fs, cfg.target_fs, cfg.resample_taps_per_phase, cfg.resample_kaiser_beta);
}

namespace {

Segmentation SegmentImpl(std::span<const double> x, const std::vector<Stage>* labels,
                         const std::string& patient_id, double fs) {
  const auto epoch_len = static_cast<std::size_t>(std::llround(kEpochSeconds * fs));
  std::size_t n_epochs = x.size() / epoch_len;
  if (labels != nullptr) {
    if (labels->size() != n_epochs) {
      std::ostringstream msg;
      msg << "patient '" << patient_id << "': signal holds " << n_epochs
          << " epochs, hypnogram " << labels->size() << "; truncating to the shorter";
      log::Warn(msg.str());
    }
    n_epochs = std::min(n_epochs, labels->size());
  }
  Segmentation out;
  out.epochs.reserve(n_epochs);
  out.sub_epochs.reserve(n_epochs * kSubEpochsPerEpoch);
  for (std::size_t i = 0; i < n_epochs; ++i) {
    Epoch e;
    e.patient_id = patient_id;
    e.epoch_index = i;
    e.samples.assign(x.begin() + static_cast<std::ptrdiff_t>(i * epoch_len),
                     x.begin() + static_cast<std::ptrdiff_t>((i + 1) * epoch_len));
    e.label = labels ? (*labels)[i] : Stage::kExcluded;
    for (auto& sub : SplitEpoch(e)) out.sub_epochs.push_back(std::move(sub));
    out.epochs.push_back(std::move(e));
  }
  return out;
}

}  // namespace

Segmentation Segment(std::span<const double> x, const Hypnogram& hyp,
                     const std::string& patient_id, double fs) {
  return SegmentImpl(x, &hyp.stages, patient_id, fs);
}

Segmentation SegmentUnlabeled(std::span<const double> x, const std::string& patient_id,
                              double fs) {
  return SegmentImpl(x, nullptr, patient_id, fs);
}

std::vector<SubEpoch> SplitEpoch(const Epoch& epoch) {
  const std::size_t sub_len = epoch.samples.size() / kSubEpochsPerEpoch;
  std::vector<SubEpoch> subs(kSubEpochsPerEpoch);
  for (std::size_t s = 0; s < kSubEpochsPerEpoch; ++s) {
    subs[s].epoch_index = epoch.epoch_index;
    subs[s].slot = s;
    subs[s].label = epoch.label;
    subs[s].samples.assign(epoch.samples.begin() + static_cast<std::ptrdiff_t>(s * sub_len),
                           epoch.samples.begin() + static_cast<std::ptrdiff_t>((s + 1) * sub_len));
  }
  return subs;
}

std::vector<bool> TransitionKeepMask(std::span<const Stage> labels) {
  const std::size_t n = labels.size();
  std::vector<bool> keep(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == Stage::kExcluded) continue;
    const bool prev_ok = i == 0 || labels[i - 1] == labels[i];
    const bool next_ok = i + 1 == n || labels[i + 1] == labels[i];
    keep[i] = prev_ok && next_ok;
  }
  return keep;
}

std::vector<Epoch> RemoveTransitionEpochs(const std::vector<Epoch>& epochs) {
  std::vector<Stage> labels;
  labels.reserve(epochs.size());
  for (const auto& e : epochs) labels.push_back(e.label);
  const auto keep = TransitionKeepMask(labels);
  std::vector<Epoch> out;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    if (keep[i]) out.push_back(epochs[i]);
  }
  return out;
}

std::vector<std::size_t> BalancedSelection(std::span<const Stage> labels, uint64_t seed) {
  if (labels.empty()) throw Error(ErrorCode::kEmptyInput, "nothing to balance");
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!IsClass(labels[i])) {
      throw Error(ErrorCode::kExcludedLabel,
                  "balancing requires merged class labels, got " + std::string(StageName(labels[i])));
    }
    by_class[ClassIndex(labels[i])].push_back(i);
  }
  std::size_t min_count = labels.size();
  for (const auto& members : by_class) {
    if (!members.empty()) min_count = std::min(min_count, members.size());
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> selected;
  for (auto& members : by_class) {
    if (members.empty()) continue;
    std::shuffle(members.begin(), members.end(), rng);
    selected.insert(selected.end(), members.begin(),
                    members.begin() + static_cast<std::ptrdiff_t>(min_count));
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

std::vector<Epoch> BalanceClasses(const std::vector<Epoch>& epochs, uint64_t seed) {
  std::vector<Stage> labels;
  labels.reserve(epochs.size());
  for (const auto& e : epochs) labels.push_back(e.label);
  std::vector<Epoch> out;
  for (std::size_t i : BalancedSelection(labels, seed)) out.push_back(epochs[i]);
  return out;
}

}  // namespace assr
